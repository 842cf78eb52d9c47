//! File emitters: Wavefront OBJ meshes and diagnostics CSV.
//!
//! Floats are written with 17 significant digits so that values parse back exactly.
//! Every file starts with `#` comment lines carrying the seed and tolerances.

use std::io::Write;
use std::path::Path;

use loopsplit_core::connection_maps::{Grid, NodeReport};
use loopsplit_core::spaceforms::{is_hyperbolic, ImmersionGrid};

use crate::error::{CliError, CliResult};
use crate::lambda::format_lambda;

/// Provenance lines written at the top of every artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub command: String,
    pub seed: u64,
    pub tolerances: String,
}

impl Header {
    fn lines(&self, extra: &[String]) -> String {
        let mut out = format!("# loopsplit {}\n# seed={}\n# tolerances: {}\n", self.command, self.seed, self.tolerances);
        for e in extra {
            out.push_str(&format!("# {e}\n"));
        }
        out
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Writes `text` to `path` in one call.
pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(path, e))
}

/// Chart used for the viewer: stereographic projection from the pole `e_{n+2}` on the
/// sphere, the projective (Klein) chart `x_i / x_{n+1}` on the hyperboloid. Only the
/// first three chart coordinates are kept.
pub fn project(im: &ImmersionGrid, p: &[f64]) -> [f64; 3] {
    let n = im.target.n_tan;
    let (pivot, denom) = if is_hyperbolic(&im.target) { (n, p[n]) } else { (n + 1, 1.0 - p[n + 1]) };
    let mut out = [0.0; 3];
    for (slot, x) in out.iter_mut().zip(p.iter().enumerate().filter(|(i, _)| *i != pivot).map(|(_, x)| x / denom)) {
        *slot = x;
    }
    out
}

pub fn chart_name(im: &ImmersionGrid) -> &'static str {
    if is_hyperbolic(&im.target) {
        "klein"
    } else {
        "stereographic"
    }
}

/// OBJ text for the immersion: one vertex per unmasked node in row-major order, two
/// triangles per grid cell whose four corners are present.
pub fn mesh_obj(im: &ImmersionGrid, header: &Header) -> (String, usize) {
    let g = &im.grid;
    let mut out = header.lines(&[format!("lambda={}", format_lambda(im.lambda)), format!("chart={}", chart_name(im))]);
    let mut vid = vec![0usize; g.len()];
    let mut count = 0;
    for (idx, p) in im.points.iter().enumerate() {
        if let Some(p) = p {
            count += 1;
            vid[idx] = count;
            let [x, y, z] = project(im, p);
            out.push_str(&format!("v {} {} {}\n", fmt_f64(x), fmt_f64(y), fmt_f64(z)));
        }
    }
    for j in 0..g.nv.saturating_sub(1) {
        for i in 0..g.nu.saturating_sub(1) {
            let corners = [g.idx(i, j), g.idx(i + 1, j), g.idx(i + 1, j + 1), g.idx(i, j + 1)];
            if corners.iter().all(|&c| vid[c] > 0) {
                let [a, b, c, d] = corners.map(|c| vid[c]);
                out.push_str(&format!("f {a} {b} {c}\nf {a} {c} {d}\n"));
            }
        }
    }
    (out, count)
}

/// Writes the mesh and returns the number of vertices; zero means the file holds only
/// the header.
pub fn emit_mesh(im: &ImmersionGrid, header: &Header, path: &Path) -> CliResult<usize> {
    let (text, count) = mesh_obj(im, header);
    write_file(path, text.as_bytes())?;
    Ok(count)
}

fn csv_text(header: &Header, extra: &[String], columns: &[String], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(columns).expect("in-memory writes succeed");
    for r in rows {
        w.write_record(&r).expect("in-memory writes succeed");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory writes succeed")).expect("csv output is utf-8");
    header.lines(extra) + &body
}

fn node_prefix(grid: &Grid, idx: usize) -> Vec<String> {
    let (i, j) = grid.coords(idx);
    let (u, v) = grid.point(idx);
    vec![i.to_string(), j.to_string(), fmt_f64(u), fmt_f64(v)]
}

/// Per-node pipeline reports: index, coordinates, mask, residual, condition, reason.
pub fn reports_csv(grid: &Grid, reports: &[NodeReport], header: &Header, extra: &[String]) -> String {
    let columns = ["i", "j", "u", "v", "masked", "residual", "condition", "reason"].map(String::from);
    let rows = reports
        .iter()
        .enumerate()
        .map(|(idx, r)| {
            let mut row = node_prefix(grid, idx);
            row.extend([
                u8::from(r.masked).to_string(),
                fmt_f64(r.residual),
                fmt_f64(r.condition),
                r.reason.clone().unwrap_or_default(),
            ]);
            row
        })
        .collect();
    csv_text(header, extra, &columns, rows)
}

/// Ambient coordinates and diagnostics of an immersion, one row per node.
pub fn immersion_csv(im: &ImmersionGrid, header: &Header) -> String {
    let dim = im.target.dim();
    let mut columns: Vec<String> = ["i", "j", "u", "v", "masked"].map(String::from).to_vec();
    columns.extend((0..dim).map(|c| format!("x{c}")));
    columns.extend(
        ["metric_det", "gauss_curvature", "normal_flatness", "immersive", "quadric", "imag_residual"].map(String::from),
    );
    let rows = (0..im.grid.len())
        .map(|idx| {
            let mut row = node_prefix(&im.grid, idx);
            row.push(u8::from(im.points[idx].is_none()).to_string());
            match &im.points[idx] {
                Some(p) => row.extend(p.iter().map(|&x| fmt_f64(x))),
                None => row.extend((0..dim).map(|_| String::new())),
            }
            let d = &im.diagnostics[idx];
            row.extend([
                fmt_opt(d.metric_det),
                fmt_opt(d.gauss_curvature),
                fmt_opt(d.normal_flatness),
                u8::from(d.immersive).to_string(),
                fmt_opt(d.quadric),
                fmt_opt(d.imag_residual),
            ]);
            row
        })
        .collect();
    let extra = [format!("lambda={}", format_lambda(im.lambda)), format!("target={:?}", im.target.kind)];
    csv_text(header, &extra, &columns, rows)
}

pub fn emit_diagnostics(text: &str, path: &Path) -> CliResult<()> {
    write_file(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use loopsplit_core::spaceforms::{example_sphere_frame, extract_immersion};
    use loopsplit_core::{GroupSpec, C64};

    fn header() -> Header {
        Header { command: "test".into(), seed: 7, tolerances: "order=1e-6".into() }
    }

    fn sphere(n: usize) -> ImmersionGrid {
        let grid = Grid::new(n, n, 0.0, 0.0, 0.1, 0.1, [0, 0]).unwrap();
        extract_immersion(&example_sphere_frame(&grid), C64::new(1.0, 0.0), &GroupSpec::sphere(2, 1)).unwrap()
    }

    /// The lower-left `2 × 2` block of a larger immersion.
    fn corner(im: &ImmersionGrid) -> ImmersionGrid {
        let keep = [im.grid.idx(0, 0), im.grid.idx(1, 0), im.grid.idx(0, 1), im.grid.idx(1, 1)];
        ImmersionGrid {
            grid: Grid::new(2, 2, im.grid.u0, im.grid.v0, im.grid.h_u, im.grid.h_v, [0, 0]).unwrap(),
            lambda: im.lambda,
            target: im.target,
            points: keep.iter().map(|&k| im.points[k].clone()).collect(),
            diagnostics: keep.iter().map(|&k| im.diagnostics[k].clone()).collect(),
        }
    }

    #[test]
    fn two_by_two_grid_gives_two_triangles() {
        let (text, count) = mesh_obj(&corner(&sphere(3)), &header());
        assert_eq!(count, 4);
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 4);
        let faces: Vec<&str> = text.lines().filter(|l| l.starts_with("f ")).collect();
        assert_eq!(faces, ["f 1 2 4", "f 1 4 3"]);
    }

    #[test]
    fn each_cell_gives_two_triangles() {
        let (text, count) = mesh_obj(&sphere(3), &header());
        assert_eq!(count, 9);
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 9);
        let faces: Vec<&str> = text.lines().filter(|l| l.starts_with("f ")).collect();
        assert_eq!(faces.len(), 8);
        assert_eq!(faces[..2], ["f 1 2 5", "f 1 5 4"]);
        assert!(text.starts_with("# loopsplit test\n# seed=7\n"));
    }

    #[test]
    fn fully_masked_grid_is_header_only() {
        let mut im = sphere(3);
        im.points.iter_mut().for_each(|p| *p = None);
        let (text, count) = mesh_obj(&im, &header());
        assert_eq!(count, 0);
        assert!(text.lines().all(|l| l.starts_with('#')));
    }

    #[test]
    fn masked_node_drops_its_faces() {
        let mut im = sphere(3);
        im.points[4] = None;
        let (text, count) = mesh_obj(&im, &header());
        assert_eq!(count, 8);
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 0);
    }

    #[test]
    fn stereographic_vertices_come_from_unit_vectors() {
        let im = sphere(4);
        for p in im.points.iter().flatten() {
            let norm: f64 = p.iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-12);
            // Inverse stereographic projection recovers the point.
            let y = project(&im, p);
            let s: f64 = y.iter().map(|x| x * x).sum();
            let back = [2.0 * y[0] / (1.0 + s), 2.0 * y[1] / (1.0 + s), 2.0 * y[2] / (1.0 + s), (s - 1.0) / (1.0 + s)];
            for (a, b) in back.iter().zip(p) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let grid = Grid::new(1, 1, 0.0, 0.0, 0.1, 0.1, [0, 0]).unwrap();
        let text = reports_csv(&grid, &[], &header(), &[]);
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body, ["i,j,u,v,masked,residual,condition,reason"]);
    }

    #[test]
    fn residuals_print_at_full_precision() {
        let grid = Grid::new(2, 1, 0.0, 0.0, 0.1, 0.1, [0, 0]).unwrap();
        let reports = vec![NodeReport::ok(1.0 / 3.0, 12.5), NodeReport::ok(std::f64::consts::PI * 1e-11, 1.0)];
        let text = reports_csv(&grid, &reports, &header(), &[]);
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        for (rec, want) in rd.records().zip(&reports) {
            let rec = rec.unwrap();
            assert_eq!(rec[5].parse::<f64>().unwrap(), want.residual);
            assert_eq!(rec[6].parse::<f64>().unwrap(), want.condition);
        }
        assert_eq!(reports_csv(&grid, &reports, &header(), &[]), text);
    }

    #[test]
    fn immersion_columns_follow_the_schema() {
        let im = sphere(3);
        let text = immersion_csv(&im, &header());
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let cols: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
        assert_eq!(cols[..9], ["i", "j", "u", "v", "masked", "x0", "x1", "x2", "x3"]);
        assert_eq!(rd.records().count(), 9);
    }
}
