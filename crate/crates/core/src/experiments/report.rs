use super::{resilience_metrics, CellStatus, ExperimentError, SweepResults};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Metrics(#[from] ExperimentError),
}

/// Paths written by [`render_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub tables: Vec<PathBuf>,
    pub figure: PathBuf,
    pub metrics: PathBuf,
    pub robustness: PathBuf,
}

impl ReportFiles {
    pub fn all(&self) -> Vec<&Path> {
        let mut paths: Vec<&Path> = self.tables.iter().map(PathBuf::as_path).collect();
        paths.extend([self.figure.as_path(), self.metrics.as_path(), self.robustness.as_path()]);
        paths
    }
}

fn percent(x: f64) -> String {
    let p = x * 100.0;
    if (p - p.round()).abs() < 1e-9 {
        format!("{}%", p.round() as i64)
    } else {
        format!("{p:.1}%")
    }
}

fn cost(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.2}")
    } else {
        "inf".to_string()
    }
}

fn sorted_unique(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

fn network_sizes(results: &SweepResults) -> Vec<usize> {
    let mut sizes: Vec<usize> = results.cells.iter().map(|c| c.service_arcs).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
}

/// Mean total over seeds (`+∞` if any seed is infeasible) and mean solve
/// time, or `None` when the grid point was not run.
fn mean_point(results: &SweepResults, service_arcs: usize, clients: usize, puv: f64, rate: f64) -> Option<(f64, f64)> {
    let cells: Vec<_> = results
        .cells
        .iter()
        .filter(|c| c.service_arcs == service_arcs && c.clients == clients && c.puv == puv && c.deviation_rate == rate)
        .collect();
    if cells.is_empty() {
        return None;
    }
    let n = cells.len() as f64;
    let total = if cells.iter().any(|c| c.status == CellStatus::Infeasible) {
        f64::INFINITY
    } else {
        cells.iter().map(|c| c.total_cost()).sum::<f64>() / n
    };
    let time = cells.iter().map(|c| c.solve_time_seconds).sum::<f64>() / n;
    Some((total, time))
}

/// Cost table for one client count: one row per network size and puv, one
/// column per deviation rate, costs averaged over seeds. Rows are numbered
/// from `first_index`.
pub fn render_table(results: &SweepResults, clients: usize, first_index: usize) -> String {
    let rates = &results.config.rate_levels;
    let mut out = String::from("In.,|V|,PUV");
    for &r in rates {
        out.push(',');
        out.push_str(&percent(r));
    }
    out.push_str(",time_s\n");

    let puvs = sorted_unique(results.cells.iter().filter(|c| c.clients == clients).map(|c| c.puv).collect());
    let mut index = first_index;
    for size in network_sizes(results) {
        for &puv in &puvs {
            let points: Vec<Option<(f64, f64)>> =
                rates.iter().map(|&r| mean_point(results, size, clients, puv, r)).collect();
            if points.iter().all(Option::is_none) {
                continue;
            }
            let _ = write!(out, "{index},{size},{}", percent(puv));
            let mut times = Vec::new();
            for p in &points {
                match p {
                    Some((total, time)) => {
                        let _ = write!(out, ",{}", cost(*total));
                        times.push(*time);
                    }
                    None => out.push(','),
                }
            }
            let mean_time = times.iter().sum::<f64>() / times.len() as f64;
            let _ = writeln!(out, ",{mean_time:.4}");
            index += 1;
        }
    }
    out
}

const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f",
];

/// Grouped bar chart: one panel per client count (rows) and network size
/// (columns); bars grouped by puv, one series per deviation rate.
pub fn render_svg(results: &SweepResults) -> String {
    const PANEL_W: f64 = 360.0;
    const PANEL_H: f64 = 240.0;
    const MARGIN: f64 = 50.0;
    const LEGEND: f64 = 40.0;

    let sizes = network_sizes(results);
    let clients = &results.config.client_levels;
    let rates = &results.config.rate_levels;
    let puvs = &results.config.puv_levels;
    let width = MARGIN + sizes.len().max(1) as f64 * (PANEL_W + MARGIN);
    let height = LEGEND + MARGIN + clients.len().max(1) as f64 * (PANEL_H + MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (k, &r) in rates.iter().enumerate() {
        let x = MARGIN + k as f64 * 90.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{x:.1}" y="12" width="12" height="12" fill="{}"/><text x="{:.1}" y="22">rate {}</text>"#,
            PALETTE[k % PALETTE.len()],
            x + 16.0,
            percent(r)
        );
    }

    for (row, &n_clients) in clients.iter().enumerate() {
        for (col, &size) in sizes.iter().enumerate() {
            let x0 = MARGIN + col as f64 * (PANEL_W + MARGIN);
            let y0 = LEGEND + MARGIN + row as f64 * (PANEL_H + MARGIN);
            let bottom = y0 + PANEL_H;
            let points: Vec<Vec<Option<f64>>> = puvs
                .iter()
                .map(|&p| rates.iter().map(|&r| mean_point(results, size, n_clients, p, r).map(|m| m.0)).collect())
                .collect();
            let top = points
                .iter()
                .flatten()
                .flatten()
                .copied()
                .filter(|v| v.is_finite())
                .fold(0.0, f64::max);
            let scale = if top > 0.0 { top } else { 1.0 };

            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{n_clients} client(s), |V|={size}</text>"#,
                x0 + PANEL_W / 2.0,
                y0 - 8.0
            );
            let _ = writeln!(
                svg,
                r#"<line x1="{x0:.1}" y1="{bottom:.1}" x2="{:.1}" y2="{bottom:.1}" stroke="black"/>"#,
                x0 + PANEL_W
            );
            let _ = writeln!(svg, r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x0:.1}" y2="{bottom:.1}" stroke="black"/>"#);
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                x0 - 4.0,
                y0 + 4.0,
                cost(scale)
            );

            let group_w = PANEL_W / puvs.len().max(1) as f64;
            let bar_w = group_w * 0.8 / rates.len().max(1) as f64;
            for (g, &puv) in puvs.iter().enumerate() {
                let gx = x0 + g as f64 * group_w + group_w * 0.1;
                for (k, value) in points[g].iter().enumerate() {
                    let Some(value) = value else { continue };
                    let bx = gx + k as f64 * bar_w;
                    let (h, fill) = if value.is_finite() {
                        (PANEL_H * value / scale, PALETTE[k % PALETTE.len()])
                    } else {
                        (PANEL_H, "#bbbbbb")
                    };
                    let _ = writeln!(
                        svg,
                        r#"<rect x="{bx:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="{fill}"><title>{}</title></rect>"#,
                        bottom - h,
                        bar_w,
                        cost(*value)
                    );
                }
                let _ = writeln!(
                    svg,
                    r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">PUV {}</text>"#,
                    x0 + (g as f64 + 0.5) * group_w,
                    bottom + 14.0,
                    percent(puv)
                );
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf, ReportError> {
    std::fs::write(&path, text).map_err(|source| ReportError::Io { path: path.clone(), source })?;
    Ok(path)
}

/// Writes one cost table per client count, the bar chart, per-cell
/// resilience metrics and robustness degrees into `out_dir`.
pub fn render_report(results: &SweepResults, out_dir: &Path) -> Result<ReportFiles, ReportError> {
    std::fs::create_dir_all(out_dir).map_err(|source| ReportError::Io { path: out_dir.to_path_buf(), source })?;
    let metrics = resilience_metrics(results)?;

    let mut tables = Vec::new();
    let mut index = 1;
    for &clients in &results.config.client_levels {
        let table = render_table(results, clients, index);
        index += table.lines().count() - 1;
        tables.push(write(out_dir.join(format!("table_{clients}_clients.csv")), &table)?);
    }
    let figure = write(out_dir.join("sensitivity.svg"), &render_svg(results))?;

    let mut text = String::from("seed,|V|,clients,PUV,rate,total,baseline,absolute_change,relative_change\n");
    for r in &metrics.rows {
        let relative = if r.relative_change.is_finite() { format!("{:.6}", r.relative_change) } else { "inf".into() };
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{},{}",
            r.seed,
            r.service_arcs,
            r.clients,
            percent(r.puv),
            percent(r.deviation_rate),
            cost(r.total),
            cost(r.baseline),
            cost(r.absolute_change),
            relative
        );
    }
    let metrics_path = write(out_dir.join("metrics.csv"), &text)?;

    let mut text = String::from("seed,|V|,clients,robustness_degree\n");
    for r in &metrics.robustness {
        let degree = r.robustness_degree.map_or_else(|| "none".to_string(), percent);
        let _ = writeln!(text, "{},{},{},{degree}", r.seed, r.service_arcs, r.clients);
    }
    let robustness = write(out_dir.join("robustness.csv"), &text)?;

    Ok(ReportFiles {
        tables,
        figure,
        metrics: metrics_path,
        robustness,
    })
}
