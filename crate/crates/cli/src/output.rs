//! File emission: CSV with `#` metadata comments, JSON mirrors, and minimal
//! SVG line plots. All writes go through a temp file in the target directory
//! followed by a rename. No timestamps anywhere: identical runs must produce
//! byte-identical files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use optomotor::dynamics::{Series, TrajectoryRecord};

/// Fixed significand width keeps output byte-stable across runs.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.12e}")
    }
}

/// Write bytes atomically (temp file + rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// A CSV document: metadata comment lines, a header row, data rows.
pub struct CsvDoc {
    meta: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvDoc {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            meta: vec![format!(
                "optomotor v{}",
                env!("CARGO_PKG_VERSION")
            )],
            header,
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, line: impl Into<String>) -> &mut Self {
        self.meta.push(line.into());
        self
    }

    pub fn row(&mut self, cells: Vec<String>) -> &mut Self {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for m in &self.meta {
            out.push_str("# ");
            out.push_str(m);
            out.push('\n');
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        write_atomic(path, self.render().as_bytes())
    }
}

/// Flatten a trajectory into CSV columns: real series keep their label,
/// complex series split into `<label>_re` / `<label>_im`. An optional label
/// filter selects series (the time column always stays).
pub fn trajectory_columns(
    record: &TrajectoryRecord,
    select: Option<&[String]>,
) -> (Vec<String>, Vec<Vec<String>>) {
    let keep = |label: &str| select.is_none_or(|s| s.iter().any(|l| l == label));
    let mut header = vec!["time".to_string()];
    let mut columns: Vec<Vec<f64>> = vec![record.times.clone()];
    for (label, series) in record.iter() {
        if !keep(label) {
            continue;
        }
        match series {
            Series::Real(v) => {
                header.push(label.to_string());
                columns.push(v.clone());
            }
            Series::Complex(v) => {
                header.push(format!("{label}_re"));
                columns.push(v.iter().map(|z| z.re).collect());
                header.push(format!("{label}_im"));
                columns.push(v.iter().map(|z| z.im).collect());
            }
        }
    }
    let rows = (0..record.times.len())
        .map(|i| columns.iter().map(|c| fmt_f64(c[i])).collect())
        .collect();
    (header, rows)
}

/// JSON mirror of a trajectory (same flattening as the CSV).
pub fn trajectory_json(
    record: &TrajectoryRecord,
    select: Option<&[String]>,
    meta: &serde_json::Value,
) -> serde_json::Value {
    let (header, _) = trajectory_columns(record, select);
    let mut series = serde_json::Map::new();
    series.insert(
        "time".into(),
        serde_json::json!(record.times),
    );
    for (label, s) in record.iter() {
        if !header.iter().any(|h| h == label || *h == format!("{label}_re")) {
            continue;
        }
        match s {
            Series::Real(v) => {
                series.insert(label.into(), serde_json::json!(v));
            }
            Series::Complex(v) => {
                let re: Vec<f64> = v.iter().map(|z| z.re).collect();
                let im: Vec<f64> = v.iter().map(|z| z.im).collect();
                series.insert(format!("{label}_re"), serde_json::json!(re));
                series.insert(format!("{label}_im"), serde_json::json!(im));
            }
        }
    }
    serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "meta": meta,
        "series": serde_json::Value::Object(series),
    })
}

/// One panel of a figure: labelled curves over a shared x axis.
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub curves: Vec<(String, Vec<(f64, f64)>)>,
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
];

const PANEL_W: f64 = 860.0;
const PANEL_H: f64 = 420.0;
const MARGIN_L: f64 = 78.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 42.0;
const MARGIN_B: f64 = 54.0;

/// Render stacked panels as a single standalone SVG.
pub fn render_svg(panels: &[Panel]) -> String {
    let total_h = PANEL_H * panels.len() as f64;
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PANEL_W}\" height=\"{total_h}\" \
         viewBox=\"0 0 {PANEL_W} {total_h}\" font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (i, p) in panels.iter().enumerate() {
        s.push_str(&render_panel(p, i as f64 * PANEL_H));
    }
    s.push_str("</svg>\n");
    s
}

fn finite_bounds(curves: &[(String, Vec<(f64, f64)>)]) -> (f64, f64, f64, f64) {
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for (_, pts) in curves {
        for &(x, y) in pts {
            if x.is_finite() {
                xmin = xmin.min(x);
                xmax = xmax.max(x);
            }
            if y.is_finite() {
                ymin = ymin.min(y);
                ymax = ymax.max(y);
            }
        }
    }
    if !xmin.is_finite() || xmax <= xmin {
        (xmin, xmax) = (0.0, 1.0);
    }
    if !ymin.is_finite() || ymax <= ymin {
        let mid = if ymin.is_finite() { ymin } else { 0.0 };
        (ymin, ymax) = (mid - 0.5, mid + 0.5);
    }
    // a little breathing room on y
    let pad = 0.05 * (ymax - ymin);
    (xmin, xmax, ymin - pad, ymax + pad)
}

fn render_panel(p: &Panel, y_off: f64) -> String {
    let (xmin, xmax, ymin, ymax) = finite_bounds(&p.curves);
    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - xmin) / (xmax - xmin) * plot_w;
    let sy = |y: f64| y_off + MARGIN_T + plot_h - (y - ymin) / (ymax - ymin) * plot_h;

    let mut s = String::new();
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        y_off + 22.0,
        xml_escape(&p.title)
    ));
    // frame
    s.push_str(&format!(
        "<rect x=\"{MARGIN_L:.1}\" y=\"{:.1}\" width=\"{plot_w:.1}\" height=\"{plot_h:.1}\" \
         fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n",
        y_off + MARGIN_T
    ));
    // ticks
    for i in 0..=5 {
        let fx = xmin + (xmax - xmin) * i as f64 / 5.0;
        let px = sx(fx);
        s.push_str(&format!(
            "<line x1=\"{px:.1}\" y1=\"{:.1}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"#333\"/>\n",
            y_off + MARGIN_T + plot_h,
            y_off + MARGIN_T + plot_h + 5.0
        ));
        s.push_str(&format!(
            "<text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            y_off + MARGIN_T + plot_h + 20.0,
            tick_label(fx)
        ));
        let fy = ymin + (ymax - ymin) * i as f64 / 5.0;
        let py = sy(fy);
        s.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{py:.1}\" x2=\"{MARGIN_L:.1}\" y2=\"{py:.1}\" stroke=\"#333\"/>\n",
            MARGIN_L - 5.0
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            MARGIN_L - 9.0,
            py + 4.0,
            tick_label(fy)
        ));
    }
    // axis labels
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        y_off + PANEL_H - 12.0,
        xml_escape(&p.x_label)
    ));
    s.push_str(&format!(
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">{}</text>\n",
        y_off + MARGIN_T + plot_h / 2.0,
        y_off + MARGIN_T + plot_h / 2.0,
        xml_escape(&p.y_label)
    ));
    // curves (NaN breaks the polyline)
    for (ci, (label, pts)) in p.curves.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        let mut segment: Vec<String> = Vec::new();
        let flush = |seg: &mut Vec<String>, s: &mut String| {
            if seg.len() > 1 {
                s.push_str(&format!(
                    "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.3\" points=\"{}\"/>\n",
                    seg.join(" ")
                ));
            }
            seg.clear();
        };
        for &(x, y) in pts {
            if x.is_finite() && y.is_finite() {
                segment.push(format!("{:.2},{:.2}", sx(x), sy(y)));
            } else {
                flush(&mut segment, &mut s);
            }
        }
        flush(&mut segment, &mut s);
        // legend entry
        let lx = MARGIN_L + plot_w - 150.0;
        let ly = y_off + MARGIN_T + 16.0 + 16.0 * ci as f64;
        s.push_str(&format!(
            "<line x1=\"{lx:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            lx + 22.0
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
            lx + 28.0,
            ly + 4.0,
            xml_escape(label)
        ));
    }
    s
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && (a >= 1e4 || a < 1e-3) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Convenience: render panels and write atomically.
pub fn write_svg(path: &Path, panels: &[Panel]) -> std::io::Result<()> {
    write_atomic(path, render_svg(panels).as_bytes())
}

/// Join an output directory and file name.
pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
