use std::fmt::Write as _;
use std::path::Path;

use super::Evaluation;
use crate::dataset::{Dataset, VARIABLE_NAMES};
use crate::error::{Error, Result};

pub const HIST_BINS: usize = 40;

/// One row per node: coordinates, then actual/predicted/absolute error per
/// variable.
pub fn field_csv(coords: &[[f64; 2]], actual: &[f64], pred: &[f64]) -> Result<String> {
    let nv = VARIABLE_NAMES.len();
    if actual.len() != coords.len() * nv || pred.len() != actual.len() {
        return Err(Error::Dimension(format!(
            "field export: {} nodes, {} actual and {} predicted values",
            coords.len(),
            actual.len(),
            pred.len()
        )));
    }
    let mut out = String::from("x,y");
    for name in VARIABLE_NAMES {
        write!(out, ",{name}_actual,{name}_pred,{name}_err").unwrap();
    }
    out.push('\n');
    for (n, c) in coords.iter().enumerate() {
        write!(out, "{:e},{:e}", c[0], c[1]).unwrap();
        for v in 0..nv {
            let (a, p) = (actual[n * nv + v], pred[n * nv + v]);
            write!(out, ",{a:e},{p:e},{:e}", (p - a).abs()).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// Equal-width bins over `[0, max]`; returns `(upper edges, counts)`.
/// The maximum value lands in the last bin.
pub fn histogram(values: &[f64], bins: usize) -> (Vec<f64>, Vec<usize>) {
    let max = values.iter().cloned().fold(0.0, f64::max);
    let width = max / bins as f64;
    let edges = (1..=bins).map(|b| width * b as f64).collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let b = if width > 0.0 {
            ((v / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[b] += 1;
    }
    (edges, counts)
}

pub fn histogram_csv(values: &[f64]) -> String {
    let (edges, counts) = histogram(values, HIST_BINS);
    let mut out = String::from("bin_lo_percent,bin_hi_percent,count\n");
    let mut lo = 0.0;
    for (hi, c) in edges.iter().zip(&counts) {
        writeln!(out, "{lo:e},{hi:e},{c}").unwrap();
        lo = *hi;
    }
    out
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Writes `stats.json`, one `hist_<var>.csv` per variable and a
/// `field_<id>.csv` for each id in `field_samples`.
pub fn write_exports(
    dir: &Path,
    eval: &Evaluation,
    ds: &Dataset,
    coords: &[[f64; 2]],
    field_samples: &[usize],
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(
        dir,
        "stats.json",
        &serde_json::to_string_pretty(&eval.stats)?,
    )?;
    for (v, name) in VARIABLE_NAMES.iter().enumerate() {
        let pct: Vec<f64> = eval
            .errors
            .iter()
            .filter_map(|e| e[v])
            .map(|x| 100.0 * x)
            .collect();
        write(dir, &format!("hist_{name}.csv"), &histogram_csv(&pct))?;
    }
    for &id in field_samples {
        let k = eval
            .samples
            .iter()
            .position(|&s| s == id)
            .ok_or_else(|| Error::Config(format!("sample {id} was not evaluated")))?;
        let text = field_csv(coords, ds.target(id), &eval.predictions[k])?;
        write(dir, &format!("field_{id}.csv"), &text)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_rows_and_header() {
        let coords: Vec<[f64; 2]> = (0..56).map(|i| [i as f64, 0.0]).collect();
        let a = vec![1.0; 168];
        let p = vec![1.5; 168];
        let text = field_csv(&coords, &a, &p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 57);
        assert_eq!(lines[0].split(',').count(), 11);
        assert!(lines[1].ends_with(",1e0,1.5e0,5e-1"));
        assert_eq!(text, field_csv(&coords, &a, &p).unwrap());
        assert!(field_csv(&coords, &a[..3], &p[..3]).is_err());
    }

    #[test]
    fn histogram_counts_sum() {
        let vals = [0.0, 0.5, 1.0, 2.0, 3.7, 4.0];
        let (edges, counts) = histogram(&vals, 40);
        assert_eq!(counts.iter().sum::<usize>(), vals.len());
        assert_eq!(*edges.last().unwrap(), 4.0);
        assert_eq!(counts[39], 1);
        let (_, zero) = histogram(&[0.0, 0.0], 40);
        assert_eq!(zero[0], 2);
        let csv = histogram_csv(&vals);
        assert_eq!(csv.lines().count(), 41);
    }
}
