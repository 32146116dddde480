//! Per-level sample files.
//!
//! Columns: `iter`, `fine_theta_0..fine_theta_{d-1}`, `coarse_theta_0..coarse_theta_{d-1}`,
//! `q_fine`, `q_coarse`, `accept_fine`, `accept_coarse`. Coarse fields are empty at
//! level 0. Floats are written with 17 significant digits so they read back exactly.

use std::path::Path;

use crate::density::ParamVector;
use crate::estimator::LevelRun;

use super::HarnessError;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn header(d: usize) -> Vec<String> {
    let mut h = vec!["iter".to_string()];
    h.extend((0..d).map(|k| format!("fine_theta_{k}")));
    h.extend((0..d).map(|k| format!("coarse_theta_{k}")));
    h.extend(["q_fine", "q_coarse", "accept_fine", "accept_coarse"].map(String::from));
    h
}

/// Writes the post-burn-in streams of one level; `first_iter` numbers the first row.
pub fn write_level_csv(path: &Path, run: &LevelRun<f64>, d: usize, first_iter: usize) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header(d))?;
    let coupled = !run.q_coarse.is_empty();
    for k in 0..run.q_fine.len() {
        let mut rec = Vec::with_capacity(2 * d + 5);
        rec.push((first_iter + k).to_string());
        rec.extend(run.fine_theta[k].as_slice().iter().map(|&v| fmt_f64(v)));
        if coupled {
            rec.extend(run.coarse_theta[k].as_slice().iter().map(|&v| fmt_f64(v)));
        } else {
            rec.extend(std::iter::repeat_n(String::new(), d));
        }
        rec.push(fmt_f64(run.q_fine[k]));
        rec.push(if coupled { fmt_f64(run.q_coarse[k]) } else { String::new() });
        rec.push((run.accept_fine[k] as u8).to_string());
        rec.push(if coupled { (run.accept_coarse[k] as u8).to_string() } else { String::new() });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn bad(path: &Path, msg: impl Into<String>) -> HarnessError {
    HarnessError::Samples(format!("{}: {}", path.display(), msg.into()))
}

/// Reads a level file back into a [`LevelRun`] with recomputed statistics.
pub fn read_level_csv(path: &Path, level: usize, d: usize, cost: f64) -> Result<LevelRun<f64>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    let hdr: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if hdr != header(d) {
        return Err(bad(path, "unexpected header"));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| bad(path, format!("{s:?}: {e}")));
    let flag = |s: &str| match s {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(bad(path, format!("bad accept flag {other:?}"))),
    };
    let (mut qf, mut qc, mut tf, mut tc, mut af, mut ac) = (vec![], vec![], vec![], vec![], vec![], vec![]);
    for rec in r.records() {
        let rec = rec?;
        let fine: Vec<f64> = (1..=d).map(|i| num(&rec[i])).collect::<Result<_, _>>()?;
        tf.push(ParamVector::new(fine).map_err(|e| bad(path, e.to_string()))?);
        qf.push(num(&rec[2 * d + 1])?);
        af.push(flag(&rec[2 * d + 3])?);
        if level > 0 {
            let coarse: Vec<f64> = (d + 1..=2 * d).map(|i| num(&rec[i])).collect::<Result<_, _>>()?;
            tc.push(ParamVector::new(coarse).map_err(|e| bad(path, e.to_string()))?);
            qc.push(num(&rec[2 * d + 2])?);
            ac.push(flag(&rec[2 * d + 4])?);
        }
    }
    Ok(LevelRun::from_streams(level, qf, qc, tf, tc, af, ac, cost))
}
