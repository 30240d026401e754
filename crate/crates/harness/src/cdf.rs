use std::io::Write;

use crate::error::Result;

/// Empirical CDF as `(value, fraction <= value)` at each distinct value,
/// ascending. NaNs are dropped.
pub fn ecdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = f,
            _ => out.push((x, f)),
        }
    }
    out
}

/// Evaluates a table from [`ecdf`] at `x`, right-continuously.
pub fn cdf_at(table: &[(f64, f64)], x: f64) -> f64 {
    match table.partition_point(|p| p.0 <= x) {
        0 => 0.0,
        i => table[i - 1].1,
    }
}

/// Kolmogorov distance between the empirical CDF of `values` and the
/// uniform CDF on [0, 1].
pub fn ks_uniform(values: &[f64]) -> f64 {
    let table = ecdf(values);
    let mut prev = 0.0;
    let mut worst: f64 = 0.0;
    for &(x, f) in &table {
        let u = x.clamp(0.0, 1.0);
        worst = worst.max((f - u).abs()).max((prev - u).abs());
        prev = f;
    }
    worst
}

pub fn write_cdf<W: Write>(table: &[(f64, f64)], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["value", "cumulative_fraction"])?;
    for (x, f) in table {
        out.write_record([x.to_string(), f.to_string()])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_series_is_one_step() {
        assert_eq!(ecdf(&[0.7; 10]), vec![(0.7, 1.0)]);
        let t = ecdf(&[0.7; 10]);
        assert_eq!(cdf_at(&t, 0.69), 0.0);
        assert_eq!(cdf_at(&t, 0.7), 1.0);
    }

    #[test]
    fn right_continuous_steps() {
        let t = ecdf(&[3.0, 1.0, 2.0, 2.0]);
        assert_eq!(t, vec![(1.0, 0.25), (2.0, 0.75), (3.0, 1.0)]);
        assert_eq!(cdf_at(&t, 2.0), 0.75);
        assert_eq!(cdf_at(&t, 1.999), 0.25);
        assert_eq!(t.last().unwrap().1, 1.0);
    }

    #[test]
    fn uniform_sample_is_close_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<f64> = (0..100_000).map(|_| rng.random()).collect();
        assert!(ks_uniform(&v) < 0.01);
        assert!(ks_uniform(&[0.0; 5]) > 0.99);
    }
}
