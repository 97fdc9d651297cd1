//! `plot`: self-contained SVG figures from analysis tables.
//!
//! Δ-maps use red when co-design is better and blue when control-only is.
//! Sector and ring bars keep that colour meaning even though their values
//! have the opposite sign.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use codesign_core::{Obstacle, Vec2};

use crate::analyze::Table;
use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Delta,
    Sector,
    Ring,
    Hist,
    Ecdf,
}

impl PlotKind {
    pub const ALL: [PlotKind; 5] = [PlotKind::Delta, PlotKind::Sector, PlotKind::Ring, PlotKind::Hist, PlotKind::Ecdf];

    pub fn as_str(&self) -> &'static str {
        match self {
            PlotKind::Delta => "delta",
            PlotKind::Sector => "sector",
            PlotKind::Ring => "ring",
            PlotKind::Hist => "hist",
            PlotKind::Ecdf => "ecdf",
        }
    }

    /// Columns a table must have to be drawn as this kind.
    fn required_columns(&self) -> &'static [&'static str] {
        match self {
            PlotKind::Delta => &["layout", "target_x", "target_y", "delta", "convention"],
            PlotKind::Sector => &["layout", "sector", "lo_deg", "hi_deg", "mean_delta", "convention"],
            PlotKind::Ring => &["layout", "ring", "lo", "hi", "mean_delta", "convention"],
            PlotKind::Hist => &["layout", "condition", "bin_lo", "bin_hi", "count"],
            PlotKind::Ecdf => &["layout", "condition", "value", "fraction"],
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlotKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        PlotKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            let valid: Vec<&str> = PlotKind::ALL.iter().map(|k| k.as_str()).collect();
            format!("unknown plot kind {s:?} (valid kinds: {})", valid.join(", "))
        })
    }
}

const WIDTH: f64 = 520.0;
const HEIGHT: f64 = 520.0;
const MARGIN: f64 = 50.0;
const GREY: &str = "#bdbdbd";
const CO_COLOR: &str = "#d62728";
const CTRL_COLOR: &str = "#1f77b4";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse().with_context(|| format!("not a number: {s:?}"))
}

struct Svg {
    body: String,
}

impl Svg {
    fn new(title: &str, config_hash: &str) -> Self {
        let mut body = String::new();
        let _ = write!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = write!(body, "<title>{}</title>", escape(title));
        let _ = write!(body, r#"<metadata id="config-hash">config_hash: {}</metadata>"#, escape(config_hash));
        let _ = write!(body, r#"<rect class="background" x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = write!(body, r#"<text x="{MARGIN}" y="20" font-size="13">{}</text>"#, escape(title));
        let _ = write!(
            body,
            r##"<text class="config-hash" x="{MARGIN}" y="{}" font-size="8" fill="#666">config {}</text>"##,
            HEIGHT - 6.0,
            escape(config_hash)
        );
        Svg { body }
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = write!(self.body, r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#, escape(s));
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = write!(self.body, r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}"/>"#);
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

/// Interpolates from a pale tint to a saturated colour; `t` in [0, 1].
fn ramp(t: f64, pale: [f64; 3], deep: [f64; 3]) -> String {
    let t = t.clamp(0.0, 1.0);
    let c: Vec<u8> = (0..3).map(|i| (pale[i] + (deep[i] - pale[i]) * t).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Fill for a value where positive means co-design better.
///
/// Values within 2% of the largest magnitude (or exactly zero) are grey.
pub fn diverging_fill(value: f64, max_abs: f64) -> String {
    let band = (0.02 * max_abs).max(1e-12);
    if !value.is_finite() || value.abs() <= band {
        return GREY.to_string();
    }
    let t = 0.25 + 0.75 * value.abs() / max_abs;
    if value > 0.0 {
        ramp(t, [252.0, 187.0, 161.0], [165.0, 15.0, 21.0])
    } else {
        ramp(t, [198.0, 219.0, 239.0], [8.0, 69.0, 148.0])
    }
}

/// Maps workspace coordinates in `[-extent, extent]²` onto the plot square.
struct WorkspaceFrame {
    extent: f64,
}

impl WorkspaceFrame {
    fn scale(&self) -> f64 {
        (WIDTH - 2.0 * MARGIN) / (2.0 * self.extent)
    }

    fn x(&self, x: f64) -> f64 {
        MARGIN + (x + self.extent) * self.scale()
    }

    fn y(&self, y: f64) -> f64 {
        MARGIN + (self.extent - y) * self.scale()
    }
}

fn draw_obstacles(svg: &mut Svg, frame: &WorkspaceFrame, obstacles: &[Obstacle]) {
    for o in obstacles {
        match *o {
            Obstacle::Circle { center, radius } => {
                let _ = write!(
                    svg.body,
                    r##"<circle class="obstacle" cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#7f7f7f" fill-opacity="0.55" stroke="#404040"/>"##,
                    frame.x(center.x),
                    frame.y(center.y),
                    radius * frame.scale()
                );
            }
            Obstacle::Rect { min, max } => {
                let _ = write!(
                    svg.body,
                    r##"<rect class="obstacle" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#7f7f7f" fill-opacity="0.55" stroke="#404040"/>"##,
                    frame.x(min.x),
                    frame.y(max.y),
                    (max.x - min.x) * frame.scale(),
                    (max.y - min.y) * frame.scale()
                );
            }
        }
    }
}

/// Smallest positive gap between distinct sorted coordinates.
fn lattice_spacing(coords: &[f64]) -> Option<f64> {
    let mut v = coords.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 1e-9).min_by(f64::total_cmp)
}

/// A layout-specific slice of a table.
struct Slice<'a> {
    table: &'a Table,
    rows: Vec<&'a Vec<String>>,
}

impl Slice<'_> {
    fn get(&self, row: &[String], col: &str) -> Result<String> {
        Ok(row[self.table.column(col)?].clone())
    }

    fn num(&self, row: &[String], col: &str) -> Result<f64> {
        parse_f64(&self.get(row, col)?)
    }
}

fn delta_svg(s: &Slice, layout: &str, hash: &str, obstacles: &[Obstacle], reach: Option<f64>) -> Result<String> {
    let mut cells = Vec::new();
    for row in &s.rows {
        cells.push((Vec2::new(s.num(row, "target_x")?, s.num(row, "target_y")?), s.num(row, "delta")?));
    }
    let metric = s.rows.first().map(|r| s.get(r, "metric")).transpose()?.unwrap_or_default();
    let convention = s.rows.first().map(|r| s.get(r, "convention")).transpose()?.unwrap_or_default();
    let xs: Vec<f64> = cells.iter().map(|c| c.0.x).collect();
    let ys: Vec<f64> = cells.iter().map(|c| c.0.y).collect();
    let spacing = match (lattice_spacing(&xs), lattice_spacing(&ys)) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => 0.05,
    };
    let far = cells.iter().map(|c| c.0.x.abs().max(c.0.y.abs())).fold(0.0, f64::max) + spacing;
    let frame = WorkspaceFrame { extent: reach.unwrap_or(far).max(far) };
    let max_abs = cells.iter().map(|c| c.1.abs()).filter(|v| v.is_finite()).fold(0.0, f64::max);

    let mut svg = Svg::new(&format!("{layout}: delta map ({metric})"), hash);
    svg.text(MARGIN, 36.0, "start", &format!("{convention}; red = co-design better, blue = control-only better"));
    let _ = write!(
        svg.body,
        r##"<rect class="frame" x="{MARGIN}" y="{MARGIN}" width="{0}" height="{0}" fill="none" stroke="#999"/>"##,
        WIDTH - 2.0 * MARGIN
    );
    if let Some(r) = reach {
        let _ = write!(
            svg.body,
            r##"<circle class="reach" cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="#999" stroke-dasharray="4 3"/>"##,
            frame.x(0.0),
            frame.y(0.0),
            r * frame.scale()
        );
    }
    let side = spacing * frame.scale();
    for (p, d) in &cells {
        let _ = write!(
            svg.body,
            r##"<rect class="cell" x="{:.2}" y="{:.2}" width="{side:.2}" height="{side:.2}" fill="{}" stroke="white" stroke-width="0.5" data-delta="{d}"><title>({}, {}): {d}</title></rect>"##,
            frame.x(p.x) - side / 2.0,
            frame.y(p.y) - side / 2.0,
            diverging_fill(*d, max_abs),
            p.x,
            p.y
        );
    }
    draw_obstacles(&mut svg, &frame, obstacles);
    svg.text(WIDTH / 2.0, HEIGHT - 22.0, "middle", &format!("max |delta| = {max_abs}"));
    Ok(svg.finish())
}

fn grouped_svg(s: &Slice, kind: PlotKind, layout: &str, hash: &str, obstacles: &[Obstacle]) -> Result<String> {
    let (lo_col, hi_col, unit) = match kind {
        PlotKind::Sector => ("lo_deg", "hi_deg", "deg"),
        _ => ("lo", "hi", "m"),
    };
    let mut bars = Vec::new();
    for row in &s.rows {
        let mean = s.get(row, "mean_delta")?;
        let value = if mean == "missing" { None } else { Some(parse_f64(&mean)?) };
        bars.push((s.num(row, lo_col)?, s.num(row, hi_col)?, value));
    }
    let metric = s.rows.first().map(|r| s.get(r, "metric")).transpose()?.unwrap_or_default();
    let convention = s.rows.first().map(|r| s.get(r, "convention")).transpose()?.unwrap_or_default();
    let max_abs = bars.iter().filter_map(|b| b.2).map(f64::abs).fold(0.0, f64::max);
    let mut svg = Svg::new(&format!("{layout}: {kind} means ({metric})"), hash);
    svg.text(MARGIN, 36.0, "start", &format!("{convention}; red = co-design better"));

    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN - 80.0;
    let zero_y = MARGIN + plot_h / 2.0;
    let scale = if max_abs > 0.0 { plot_h / 2.0 / max_abs } else { 0.0 };
    svg.line(MARGIN, zero_y, MARGIN + plot_w, zero_y, "#333");
    let slot = plot_w / bars.len().max(1) as f64;
    for (i, (lo, hi, value)) in bars.iter().enumerate() {
        let x = MARGIN + i as f64 * slot + slot * 0.15;
        let w = slot * 0.7;
        match value {
            Some(v) => {
                let h = v.abs() * scale;
                let y = if *v >= 0.0 { zero_y - h } else { zero_y };
                let _ = write!(
                    svg.body,
                    r#"<rect class="bar" x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{}" data-value="{v}"/>"#,
                    diverging_fill(-v, max_abs)
                );
            }
            None => svg.text(x + w / 2.0, zero_y - 6.0, "middle", "missing"),
        }
        svg.text(x + w / 2.0, MARGIN + plot_h + 16.0, "middle", &format!("{i}"));
        svg.text(x + w / 2.0, MARGIN + plot_h + 30.0, "middle", &format!("{lo}-{hi}"));
    }
    svg.text(WIDTH / 2.0, MARGIN + plot_h + 46.0, "middle", &format!("{kind} ({unit})"));
    if !obstacles.is_empty() {
        // Small inset of the layout in the top-right corner.
        let inset = 90.0;
        let extent = obstacles.iter().map(obstacle_extent).fold(0.3, f64::max);
        let ox = WIDTH - MARGIN - inset;
        let oy = 44.0;
        let _ = write!(
            svg.body,
            r##"<g class="inset" transform="translate({ox:.2},{oy:.2}) scale({:.4})"><rect x="{MARGIN}" y="{MARGIN}" width="{1}" height="{1}" fill="white" stroke="#999"/>"##,
            inset / (WIDTH - 2.0 * MARGIN),
            WIDTH - 2.0 * MARGIN
        );
        draw_obstacles(&mut svg, &WorkspaceFrame { extent }, obstacles);
        svg.body.push_str("</g>");
    }
    Ok(svg.finish())
}

fn obstacle_extent(o: &Obstacle) -> f64 {
    match *o {
        Obstacle::Circle { center, radius } => center.x.abs().max(center.y.abs()) + radius,
        Obstacle::Rect { min, max } => [min.x, min.y, max.x, max.y].iter().fold(0.0, |a: f64, v| a.max(v.abs())),
    }
}

fn condition_color(c: &str) -> &'static str {
    if c == "co_design" {
        CO_COLOR
    } else {
        CTRL_COLOR
    }
}

fn conditions_of(s: &Slice) -> Result<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    for row in &s.rows {
        let c = s.get(row, "condition")?;
        if !out.contains(&c) {
            out.push(c);
        }
    }
    Ok(out)
}

fn legend(svg: &mut Svg, conditions: &[String]) {
    for (i, c) in conditions.iter().enumerate() {
        let y = 44.0 + 14.0 * i as f64;
        let _ = write!(
            svg.body,
            r#"<rect class="legend" x="{:.2}" y="{:.2}" width="10" height="10" fill="{}" fill-opacity="0.6"/>"#,
            WIDTH - MARGIN - 100.0,
            y - 9.0,
            condition_color(c)
        );
        svg.text(WIDTH - MARGIN - 86.0, y, "start", c);
    }
}

fn hist_svg(s: &Slice, layout: &str, hash: &str) -> Result<String> {
    let conditions = conditions_of(s)?;
    let metric = s.rows.first().map(|r| s.get(r, "metric")).transpose()?.unwrap_or_default();
    // Bin labels in first-condition order; counts per condition.
    let mut bins: Vec<(String, String)> = Vec::new();
    let mut counts: Vec<Vec<f64>> = vec![Vec::new(); conditions.len()];
    for row in &s.rows {
        let key = (s.get(row, "bin_lo")?, s.get(row, "bin_hi")?);
        let bi = match bins.iter().position(|b| *b == key) {
            Some(i) => i,
            None => {
                bins.push(key);
                bins.len() - 1
            }
        };
        let ci = conditions.iter().position(|c| *c == s.get(row, "condition").unwrap_or_default()).unwrap_or(0);
        if counts[ci].len() <= bi {
            counts[ci].resize(bi + 1, 0.0);
        }
        counts[ci][bi] = s.num(row, "count")?;
    }
    let max = counts.iter().flatten().copied().fold(0.0, f64::max);
    let mut svg = Svg::new(&format!("{layout}: histogram of {metric}"), hash);
    legend(&mut svg, &conditions);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN - 80.0;
    let base = MARGIN + 40.0 + plot_h;
    let slot = plot_w / bins.len().max(1) as f64;
    svg.line(MARGIN, base, MARGIN + plot_w, base, "#333");
    for (ci, c) in conditions.iter().enumerate() {
        for (bi, n) in counts[ci].iter().enumerate() {
            let h = if max > 0.0 { n / max * plot_h } else { 0.0 };
            let _ = write!(
                svg.body,
                r#"<rect class="bar" x="{:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="{}" fill-opacity="0.55" data-condition="{}" data-count="{n}"/>"#,
                MARGIN + bi as f64 * slot + 2.0,
                base - h,
                slot - 4.0,
                condition_color(c),
                escape(c)
            );
        }
    }
    for (bi, (lo, hi)) in bins.iter().enumerate() {
        svg.text(MARGIN + (bi as f64 + 0.5) * slot, base + 14.0, "middle", &format!("[{lo},"));
        svg.text(MARGIN + (bi as f64 + 0.5) * slot, base + 26.0, "middle", &format!("{hi})"));
    }
    svg.text(MARGIN - 6.0, base - plot_h, "end", &format!("{max}"));
    Ok(svg.finish())
}

fn ecdf_svg(s: &Slice, layout: &str, hash: &str) -> Result<String> {
    let conditions = conditions_of(s)?;
    let metric = s.rows.first().map(|r| s.get(r, "metric")).transpose()?.unwrap_or_default();
    let mut series: Vec<Vec<(f64, f64)>> = vec![Vec::new(); conditions.len()];
    for row in &s.rows {
        let c = s.get(row, "condition")?;
        let ci = conditions.iter().position(|x| *x == c).unwrap_or(0);
        series[ci].push((s.num(row, "value")?, s.num(row, "fraction")?));
    }
    let xmax = series.iter().flatten().map(|p| p.0).filter(|v| v.is_finite()).fold(0.0, f64::max).max(1e-12) * 1.05;
    let xmin = series.iter().flatten().map(|p| p.0).filter(|v| v.is_finite()).fold(0.0, f64::min);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN - 40.0;
    let px = |x: f64| MARGIN + (x - xmin) / (xmax - xmin) * plot_w;
    let py = |f: f64| MARGIN + 20.0 + (1.0 - f) * plot_h;
    let mut svg = Svg::new(&format!("{layout}: ECDF of {metric}"), hash);
    legend(&mut svg, &conditions);
    svg.line(MARGIN, py(0.0), MARGIN + plot_w, py(0.0), "#333");
    svg.line(MARGIN, py(0.0), MARGIN, py(1.0), "#333");
    for (ci, c) in conditions.iter().enumerate() {
        let mut pts = format!("{:.2},{:.2}", px(xmin), py(0.0));
        let mut prev = 0.0;
        for (v, f) in &series[ci] {
            let _ = write!(pts, " {:.2},{:.2} {:.2},{:.2}", px(*v), py(prev), px(*v), py(*f));
            prev = *f;
        }
        let _ = write!(pts, " {:.2},{:.2}", px(xmax), py(prev));
        let _ = write!(
            svg.body,
            r#"<polyline class="ecdf" points="{pts}" fill="none" stroke="{}" stroke-width="1.5" data-condition="{}"/>"#,
            condition_color(c),
            escape(c)
        );
    }
    svg.text(MARGIN + plot_w, py(0.0) + 16.0, "end", &format!("{metric} up to {xmax:.4}"));
    svg.text(MARGIN - 6.0, py(1.0) + 4.0, "end", "1");
    Ok(svg.finish())
}

/// Renders one SVG per layout in `table`. Returns `(layout, svg)` pairs.
pub fn render(table: &Table, kind: PlotKind, config: Option<&ExperimentConfig>) -> Result<Vec<(String, String)>> {
    for col in kind.required_columns() {
        if !table.header.iter().any(|h| h == col) {
            bail!("table is not a {kind} table: missing column {col:?}");
        }
    }
    let layout_col = table.column("layout")?;
    let hash_col = table.column("config_hash").ok();
    let mut layouts: Vec<&str> = Vec::new();
    for r in &table.rows {
        if !layouts.contains(&r[layout_col].as_str()) {
            layouts.push(&r[layout_col]);
        }
    }
    let mut out = Vec::new();
    for layout in layouts {
        let rows: Vec<&Vec<String>> = table.rows.iter().filter(|r| r[layout_col] == layout).collect();
        let hash = hash_col.map(|c| rows[0][c].clone()).unwrap_or_default();
        let obstacles = config.and_then(|c| c.layout(layout)).map(|l| l.obstacles.clone()).unwrap_or_default();
        let slice = Slice { table, rows };
        let svg = match kind {
            PlotKind::Delta => delta_svg(&slice, layout, &hash, &obstacles, config.map(|c| c.baseline.reach()))?,
            PlotKind::Sector | PlotKind::Ring => grouped_svg(&slice, kind, layout, &hash, &obstacles)?,
            PlotKind::Hist => hist_svg(&slice, layout, &hash)?,
            PlotKind::Ecdf => ecdf_svg(&slice, layout, &hash)?,
        };
        out.push((layout.to_string(), svg));
    }
    Ok(out)
}

/// Reads a table and writes `<kind>_<layout>.svg` files into `out_dir`.
pub fn cmd_plot(table_path: &Path, kind: PlotKind, config: Option<&Path>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let f = fs::File::open(table_path).with_context(|| format!("opening {}", table_path.display()))?;
    let table = Table::read_csv(f).with_context(|| format!("reading {}", table_path.display()))?;
    if table.rows.is_empty() {
        bail!("{} has no rows to plot", table_path.display());
    }
    let cfg = config.map(ExperimentConfig::load).transpose()?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut paths = Vec::new();
    for (layout, svg) in render(&table, kind, cfg.as_ref())? {
        let p = out_dir.join(format!("{kind}_{layout}.svg"));
        fs::write(&p, svg).with_context(|| format!("writing {}", p.display()))?;
        paths.push(p);
    }
    Ok(paths)
}
