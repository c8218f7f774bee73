use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use ndarray::Array2;
use scarmap_core::egm::EgmArray;
use scarmap_core::ep::{read_vm_frame, read_vm_manifest};
use scarmap_core::inverse::{read_training_curve, CURVE_HEADER};
use scarmap_core::io::read_json;
use scarmap_core::substrate::{load_mask, load_tensor_field};
use serde_json::Value;

use crate::render::{finite_range, heatmap, line_plot, Colormap, Series};
use crate::{Ctx, Invalid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Component {
    #[value(name = "d_xx")]
    Dxx,
    #[value(name = "d_yy")]
    Dyy,
    #[value(name = "d_xy")]
    Dxy,
    /// Larger tensor eigenvalue.
    MaxEigen,
    /// Stored scar mask (scar = 1).
    Mask,
}

#[derive(clap::Args)]
pub struct Args {
    /// A field, electrogram or V_m stack manifest, or a trace/loss-curve CSV.
    pub input: PathBuf,
    /// Output file; the extension (.png or .csv) picks the format.
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "d_xx")]
    pub component: Component,
    /// Electrode as ROW,COL (default: the centre of the array).
    #[arg(long)]
    pub electrode: Option<String>,
    /// V_m frame index (default: the last).
    #[arg(long)]
    pub frame: Option<usize>,
    /// Pixels per cell in heatmaps.
    #[arg(long, default_value_t = 1)]
    pub scale: u32,
    /// Colour range as LO,HI (default: data range).
    #[arg(long)]
    pub range: Option<String>,
    #[arg(long, value_enum, default_value = "gray")]
    pub colormap: Colormap,
    #[arg(long, default_value_t = 640)]
    pub width: u32,
    #[arg(long, default_value_t = 360)]
    pub height: u32,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Format {
    Png,
    Csv,
}

fn pair<T: std::str::FromStr>(s: &str, what: &str) -> Result<(T, T)> {
    let bad = || Invalid(format!("{what} must look like A,B, got `{s}`"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

fn matrix_csv(v: &Array2<f64>) -> String {
    let mut s = String::new();
    for row in v.rows() {
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

pub fn run(_ctx: &Ctx, args: &Args) -> Result<()> {
    let format = match args.out.extension().and_then(|e| e.to_str()) {
        Some("png") => Format::Png,
        Some("csv") => Format::Csv,
        _ => {
            return Err(Invalid(format!(
                "output {} must end in .png or .csv",
                args.out.display()
            ))
            .into());
        }
    };
    if !args.input.exists() {
        return Err(Invalid(format!("{} does not exist", args.input.display())).into());
    }
    if args.input.extension().is_some_and(|e| e == "csv") {
        return plot_csv(args, format);
    }
    let raw: Value = read_json(&args.input)?;
    match raw.get("kind").and_then(Value::as_str) {
        Some("tensor_field") => plot_field(args, format),
        Some("egm") => plot_egm(args, format),
        Some("vm_stack") => plot_vm(args, format),
        other => Err(Invalid(format!(
            "cannot plot {}: unknown artifact kind {}",
            args.input.display(),
            other.map_or("(none)".to_string(), |k| format!("`{k}`"))
        ))
        .into()),
    }
}

fn emit_map(args: &Args, format: Format, v: &Array2<f64>) -> Result<()> {
    match format {
        Format::Csv => write_text(&args.out, &matrix_csv(v)),
        Format::Png => {
            let range = match &args.range {
                Some(r) => pair(r, "--range")?,
                None => finite_range(v.view()).unwrap_or((0.0, 0.0)),
            };
            save_png(
                &args.out,
                heatmap(v.view(), range, args.scale, args.colormap),
            )
        }
    }
}

fn plot_field(args: &Args, format: Format) -> Result<()> {
    let (f, m) = load_tensor_field(&args.input)?;
    let (rows, cols) = f.dim();
    let v = match args.component {
        Component::Dxx => f.d_xx.clone(),
        Component::Dyy => f.d_yy.clone(),
        Component::Dxy => f.d_xy.clone(),
        Component::MaxEigen => Array2::from_shape_fn((rows, cols), |(i, j)| f.eigenvalues(i, j).1),
        Component::Mask => {
            let name = m
                .mask
                .as_ref()
                .ok_or_else(|| Invalid(format!("{} has no scar mask", args.input.display())))?;
            let dir = args.input.parent().unwrap_or(Path::new("."));
            load_mask(&dir.join(name), rows, cols)?.mapv(f64::from)
        }
    };
    emit_map(args, format, &v)
}

fn plot_vm(args: &Args, format: Format) -> Result<()> {
    let m = read_vm_manifest(&args.input)?;
    if m.shape[0] == 0 {
        return Err(Invalid(format!("{} holds no frames", args.input.display())).into());
    }
    let k = args.frame.unwrap_or(m.shape[0] - 1);
    let v = read_vm_frame(&args.input, &m, k)?;
    emit_map(args, format, &v)
}

fn plot_egm(args: &Args, format: Format) -> Result<()> {
    let egm = EgmArray::load(&args.input)?;
    let (r, c) = match &args.electrode {
        Some(s) => pair(s, "--electrode")?,
        None => (egm.grid.rows / 2, egm.grid.cols / 2),
    };
    let csv = egm.to_csv(r, c)?;
    match format {
        Format::Csv => write_text(&args.out, &csv),
        Format::Png => {
            let y = egm.trace(r, c);
            let x: Vec<f64> = (1..=y.len())
                .map(|k| k as f64 * egm.sample_interval_ms)
                .collect();
            let img = line_plot(
                &[Series {
                    x: &x,
                    y: &y,
                    color: [20, 20, 20],
                }],
                args.width,
                args.height,
            );
            save_png(&args.out, img)
        }
    }
}

fn plot_csv(args: &Args, format: Format) -> Result<()> {
    if format != Format::Png {
        return Err(Invalid("CSV inputs can only be drawn as PNG".into()).into());
    }
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let header = text.lines().next().unwrap_or("").trim();
    let img = if header == CURVE_HEADER {
        let pts = read_training_curve(&args.input)?;
        let x: Vec<f64> = pts.iter().map(|p| p.epoch as f64).collect();
        let train: Vec<f64> = pts.iter().map(|p| p.train_rmse).collect();
        let val: Vec<f64> = pts.iter().map(|p| p.val_rmse).collect();
        line_plot(
            &[
                Series {
                    x: &x,
                    y: &train,
                    color: [31, 119, 180],
                },
                Series {
                    x: &x,
                    y: &val,
                    color: [255, 127, 14],
                },
            ],
            args.width,
            args.height,
        )
    } else if header == "t_ms,phi" {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (k, line) in text
            .lines()
            .enumerate()
            .skip(1)
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let (t, v): (f64, f64) = pair(line, "trace row")
                .with_context(|| format!("{} line {}", args.input.display(), k + 1))?;
            x.push(t);
            y.push(v);
        }
        line_plot(
            &[Series {
                x: &x,
                y: &y,
                color: [20, 20, 20],
            }],
            args.width,
            args.height,
        )
    } else {
        return Err(Invalid(format!(
            "cannot plot {}: unknown CSV header `{header}`",
            args.input.display()
        ))
        .into());
    };
    save_png(&args.out, img)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn save_png(path: &Path, img: image::RgbImage) -> Result<()> {
    img.save(path)
        .with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}
