//! Success-rate heatmaps: a bit-exact binary PGM plus optional tick and SVG
//! companions.

use std::fmt::Write as _;
use std::path::Path;

use super::CellResult;
use crate::{Error, Result};

/// SVG pixels per cell.
const SVG_CELL: f64 = 12.0;

/// Cells arranged for display: rows by descending `ρ`, columns by ascending `δ`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateGrid {
    pub deltas: Vec<f64>,
    pub rhos: Vec<f64>,
    /// Row-major success rates.
    pub rates: Vec<f64>,
}

impl RateGrid {
    pub fn from_results(results: &[CellResult]) -> Result<Self> {
        let mut deltas: Vec<f64> = results.iter().map(|c| c.delta).collect();
        let mut rhos: Vec<f64> = results.iter().map(|c| c.rho).collect();
        deltas.sort_by(f64::total_cmp);
        deltas.dedup();
        rhos.sort_by(|a, b| b.total_cmp(a));
        rhos.dedup();
        if deltas.is_empty() {
            return Err(Error::RaggedGrid("no cells".into()));
        }
        let (w, h) = (deltas.len(), rhos.len());
        let mut rates = vec![None; w * h];
        for c in results {
            let col = deltas.iter().position(|d| *d == c.delta).unwrap_or(0);
            let row = rhos.iter().position(|r| *r == c.rho).unwrap_or(0);
            if rates[row * w + col].replace(c.success_rate()).is_some() {
                return Err(Error::RaggedGrid(format!("duplicate cell delta={} rho={}", c.delta, c.rho)));
            }
        }
        let missing: Vec<String> = (0..w * h)
            .filter(|&i| rates[i].is_none())
            .map(|i| format!("(delta={}, rho={})", deltas[i % w], rhos[i / w]))
            .collect();
        if !missing.is_empty() {
            return Err(Error::RaggedGrid(format!("missing cells: {}", missing.join(", "))));
        }
        Ok(Self {
            deltas,
            rhos,
            rates: rates.into_iter().flatten().collect(),
        })
    }

    pub fn width(&self) -> usize {
        self.deltas.len()
    }

    pub fn height(&self) -> usize {
        self.rhos.len()
    }

    /// `round(255 · rate)` per cell.
    pub fn pixels(&self) -> Vec<u8> {
        self.rates.iter().map(|r| (255.0 * r.clamp(0.0, 1.0)).round() as u8).collect()
    }
}

/// A decoded binary greymap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub comments: Vec<String>,
    pub pixels: Vec<u8>,
}

impl Pgm {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = b"P5\n".to_vec();
        for c in &self.comments {
            out.extend_from_slice(format!("# {c}\n").as_bytes());
        }
        out.extend_from_slice(format!("{} {}\n255\n", self.width, self.height).as_bytes());
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Parse {
            line: 0,
            message: format!("pgm: {m}"),
        };
        let mut pos = 0;
        let mut comments = Vec::new();
        let mut fields = Vec::new();
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos >= bytes.len() {
                return Err(bad("truncated header"));
            }
            if bytes[pos] == b'#' {
                let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
                comments.push(String::from_utf8_lossy(&bytes[pos + 1..end]).trim().to_string());
                pos = end;
                continue;
            }
            let end = bytes[pos..]
                .iter()
                .position(|b| b.is_ascii_whitespace())
                .map_or(bytes.len(), |e| pos + e);
            fields.push(String::from_utf8_lossy(&bytes[pos..end]).to_string());
            pos = end;
        }
        if fields[0] != "P5" {
            return Err(bad("not a binary greymap"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
        let (width, height, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if maxval != 255 {
            return Err(bad("maxval must be 255"));
        }
        // exactly one whitespace byte separates the header from the raster
        let pixels = bytes.get(pos + 1..).unwrap_or_default().to_vec();
        if pixels.len() != width * height {
            return Err(bad("raster size mismatch"));
        }
        Ok(Self {
            width,
            height,
            comments,
            pixels,
        })
    }
}

/// Builds the PGM for `results`, tagged with the sweep hash.
pub fn render_pgm(results: &[CellResult], sweep_hash: &str) -> Result<Pgm> {
    let grid = RateGrid::from_results(results)?;
    Ok(Pgm {
        width: grid.width(),
        height: grid.height(),
        comments: vec![format!("sweep {sweep_hash}")],
        pixels: grid.pixels(),
    })
}

/// Companion files written next to the PGM.
#[derive(Clone, Debug, Default)]
pub struct HeatmapOptions<'a> {
    /// Sweep hash recorded in the PGM comment.
    pub sweep_hash: &'a str,
    /// Text file listing axis values.
    pub ticks: Option<&'a Path>,
    /// Two-column `(δ, ρ)` curve and the SVG it is drawn into.
    pub overlay: Option<(&'a Path, &'a Path)>,
}

pub fn write_heatmap(results: &[CellResult], path: &Path, opts: &HeatmapOptions<'_>) -> Result<()> {
    let grid = RateGrid::from_results(results)?;
    let pgm = render_pgm(results, opts.sweep_hash)?;
    std::fs::write(path, pgm.encode())?;
    if let Some(ticks) = opts.ticks {
        std::fs::write(ticks, ticks_text(&grid))?;
    }
    if let Some((curve, svg)) = opts.overlay {
        let points = read_curve(&std::fs::read_to_string(curve)?)?;
        std::fs::write(svg, render_svg(&grid, &points))?;
    }
    Ok(())
}

pub fn ticks_text(grid: &RateGrid) -> String {
    let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
    format!("delta {}\nrho {}\n", join(&grid.deltas), join(&grid.rhos))
}

/// Parses whitespace- or comma-separated `δ ρ` pairs; `#` starts a comment.
pub fn read_curve(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: idx + 1,
                message: format!("{e}"),
            })?;
        match nums.as_slice() {
            [d, r] => out.push((*d, *r)),
            _ => {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "expected two columns".into(),
                })
            }
        }
    }
    Ok(out)
}

fn axis(values: &[f64], v: f64, ascending: bool) -> f64 {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let n = values.len();
    let frac = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
    let frac = if ascending { frac } else { 1.0 - frac };
    let span = if n > 1 { (n - 1) as f64 } else { 0.0 };
    (frac * span + 0.5) * SVG_CELL
}

pub fn render_svg(grid: &RateGrid, curve: &[(f64, f64)]) -> String {
    let (w, h) = (grid.width(), grid.height());
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" shape-rendering="crispEdges">"#,
        w as f64 * SVG_CELL,
        h as f64 * SVG_CELL
    );
    for (i, p) in grid.pixels().iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{SVG_CELL}" height="{SVG_CELL}" fill="rgb({p},{p},{p})"/>"#,
            (i % w) as f64 * SVG_CELL,
            (i / w) as f64 * SVG_CELL
        );
    }
    if !curve.is_empty() {
        let pts: Vec<String> = curve
            .iter()
            .map(|&(d, r)| format!("{:.3},{:.3}", axis(&grid.deltas, d, true), axis(&grid.rhos, r, false)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="red" stroke-width="2"/>"#,
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::SolverKind;

    fn cell(delta: f64, rho: f64, successes: usize, trials: usize) -> CellResult {
        CellResult {
            solver: SolverKind::Acal,
            n: 10,
            m: 5,
            l: 2,
            k: 1,
            sigma: 0.0,
            pc: 0.0,
            delta,
            rho,
            trials,
            successes,
            mean_mu: 0.0,
            mean_iterations: 0.0,
            mean_wall_ms: 0.0,
            failures: vec![],
        }
    }

    #[test]
    fn two_by_two_rounding() {
        // rates (0, 1; 0.5, 1) with the top row at the larger rho
        let cells = vec![
            cell(0.5, 0.2, 0, 2),
            cell(1.0, 0.2, 2, 2),
            cell(0.5, 0.1, 1, 2),
            cell(1.0, 0.1, 2, 2),
        ];
        let pgm = render_pgm(&cells, "abc").unwrap();
        assert_eq!((pgm.width, pgm.height), (2, 2));
        assert_eq!(pgm.pixels, vec![0, 255, 128, 255]);
    }

    #[test]
    fn uniform_grids() {
        let all: Vec<_> = (0..6).map(|i| cell(0.1 * (i % 3) as f64, 0.1 * (i / 3) as f64, 3, 3)).collect();
        assert!(render_pgm(&all, "h").unwrap().pixels.iter().all(|&p| p == 255));
        let none: Vec<_> = (0..6).map(|i| cell(0.1 * (i % 3) as f64, 0.1 * (i / 3) as f64, 0, 3)).collect();
        assert!(render_pgm(&none, "h").unwrap().pixels.iter().all(|&p| p == 0));
    }

    #[test]
    fn ragged_grid_lists_missing_cells() {
        let cells = vec![cell(0.5, 0.2, 0, 1), cell(1.0, 0.2, 0, 1), cell(0.5, 0.1, 0, 1)];
        match RateGrid::from_results(&cells) {
            Err(Error::RaggedGrid(msg)) => assert!(msg.contains("delta=1, rho=0.1"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let dup = vec![cell(0.5, 0.2, 0, 1), cell(0.5, 0.2, 1, 1)];
        assert!(matches!(RateGrid::from_results(&dup), Err(Error::RaggedGrid(_))));
    }

    #[test]
    fn pgm_encoding() {
        let pgm = render_pgm(&[cell(0.5, 0.5, 1, 4)], "deadbeef").unwrap();
        let bytes = pgm.encode();
        assert_eq!(bytes, b"P5\n# sweep deadbeef\n1 1\n255\n\x40".to_vec());
        assert_eq!(Pgm::decode(&bytes).unwrap(), pgm);
    }

    #[test]
    fn pgm_decode_rejects_garbage() {
        assert!(Pgm::decode(b"P2\n1 1\n255\n\x00").is_err());
        assert!(Pgm::decode(b"P5\n2 1\n255\n\x00").is_err());
        assert!(Pgm::decode(b"P5\n1 1\n").is_err());
    }

    #[test]
    fn curve_parsing() {
        let pts = read_curve("# header\n0.1 0.05\n0.5,0.3\n\n1.0\t0.9 # end\n").unwrap();
        assert_eq!(pts, vec![(0.1, 0.05), (0.5, 0.3), (1.0, 0.9)]);
        assert!(matches!(read_curve("0.1 0.2 0.3"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_curve("0.1 0.2\nx 1"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn svg_has_cells_and_overlay() {
        let cells = vec![cell(0.5, 0.2, 0, 2), cell(1.0, 0.2, 2, 2), cell(0.5, 0.1, 1, 2), cell(1.0, 0.1, 2, 2)];
        let grid = RateGrid::from_results(&cells).unwrap();
        let svg = render_svg(&grid, &[(0.5, 0.1), (1.0, 0.2)]);
        assert_eq!(svg.matches("<rect").count(), 4);
        // bottom-left cell center to top-right cell center
        assert!(svg.contains(r#"points="6.000,18.000 18.000,6.000""#), "{svg}");
        assert_eq!(ticks_text(&grid), "delta 0.5 1\nrho 0.2 0.1\n");
    }
}
