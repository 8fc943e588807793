//! CSV output. Floats carry 17 significant digits so they parse back to the
//! same bits.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Trajectory;

pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Marker line appended when a trajectory overflowed.
pub const DIVERGED_MARKER: &str = "# diverged";

/// `t,regime,x1..xp` with 1-based regimes, plus `# diverged,t=<k>` when the
/// path overflowed at step `k`.
pub fn trajectory_to_csv(t: &Trajectory) -> String {
    let p = t.x.first().map_or(0, Vec::len);
    let mut out = String::from("t,regime");
    for k in 1..=p {
        let _ = write!(out, ",x{k}");
    }
    out.push('\n');
    for (k, (x, r)) in t.x.iter().zip(&t.regimes).enumerate() {
        let _ = write!(out, "{k},{}", r + 1);
        for v in x {
            out.push(',');
            out.push_str(&fmt17(*v));
        }
        out.push('\n');
    }
    if let Some(k) = t.diverged_at {
        let _ = writeln!(out, "{DIVERGED_MARKER},t={k}");
    }
    out
}

/// Parsed trajectory CSV: `(states, 0-based regimes, divergence step)`.
pub type ParsedTrajectory = (Vec<Vec<f64>>, Vec<usize>, Option<usize>);

fn reader(text: &str) -> ::csv::Reader<&[u8]> {
    ::csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(::csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn line_of(rec: &::csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

pub fn parse_trajectory_csv(text: &str) -> Result<ParsedTrajectory> {
    let header = text.lines().next().ok_or_else(|| Error::Config("empty trajectory CSV".into()))?;
    if !header.starts_with("t,regime") {
        return Err(Error::Config(format!("unexpected header '{header}'")));
    }
    // the divergence marker is a comment line, so the reader skips it
    let div = text
        .lines()
        .find_map(|l| l.strip_prefix(DIVERGED_MARKER))
        .and_then(|rest| rest.trim_start_matches(",t=").parse().ok());
    let (mut xs, mut rs) = (Vec::new(), Vec::new());
    for rec in reader(text).records().skip(1) {
        let rec = rec.map_err(|e| Error::Config(e.to_string()))?;
        let ln = line_of(&rec);
        let bad = |e: String| Error::Config(format!("line {ln}: {e}"));
        if rec.len() < 2 {
            return Err(bad("too few fields".into()));
        }
        let r: usize = rec[1].parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
        rs.push(r.checked_sub(1).ok_or_else(|| bad("regime labels start at 1".into()))?);
        xs.push(rec.iter().skip(2).map(|f| f.parse::<f64>().map_err(|e| bad(e.to_string()))).collect::<Result<Vec<_>>>()?);
    }
    Ok((xs, rs, div))
}

/// Reads a single numeric column (the last column when several are present),
/// skipping a non-numeric header, comments and blank lines.
pub fn read_series(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::MissingInput(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (k, rec) in reader(&text).records().enumerate() {
        let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let Some(field) = rec.iter().next_back() else { continue };
        if field.is_empty() && rec.len() == 1 {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if k == 0 => continue,
            Err(e) => return Err(Error::Config(format!("{} line {}: {e}", path.display(), line_of(&rec)))),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn trajectory_csv_is_lossless(
            rows in prop::collection::vec((0usize..4, prop::collection::vec(prop::num::f64::NORMAL, 3)), 1..30),
            div in prop::option::of(1usize..100)
        ) {
            let t = Trajectory {
                x: rows.iter().map(|r| r.1.clone()).collect(),
                regimes: rows.iter().map(|r| r.0).collect(),
                seed: 0,
                model_hash: String::new(),
                diverged_at: div,
            };
            let (x, r, d) = parse_trajectory_csv(&trajectory_to_csv(&t)).unwrap();
            prop_assert_eq!(x, t.x);
            prop_assert_eq!(r, t.regimes);
            prop_assert_eq!(d, div);
        }
    }

    #[test]
    fn series_reader_skips_header_and_comments() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "t, rain\n# note\n0, 1.5\n\n1,2\n2 , -0.25\n").unwrap();
        assert_eq!(read_series(&p).unwrap(), vec![1.5, 2.0, -0.25]);
        std::fs::write(&p, "0.5\nabc\n").unwrap();
        let err = read_series(&p).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(matches!(read_series(&dir.path().join("none.csv")), Err(Error::MissingInput(_))));
    }

    #[test]
    fn fmt17_non_finite() {
        assert_eq!(fmt17(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt17(f64::NAN), "nan");
    }
}
