use crate::error::{EwaldError, Result};

/// (1/sqrt(n)) ||a - b||_2
pub fn rms_error(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(a, b)?;
    Ok((diff_sq(a, b) / a.len().max(1) as f64).sqrt())
}

/// ||a - b||_2 / ||b||_2
pub fn rel_l2_error(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(a, b)?;
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nb == 0.0 {
        return Err(EwaldError::Domain("relative error against a zero vector".into()));
    }
    Ok(diff_sq(a, b).sqrt() / nb)
}

fn diff_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(EwaldError::Domain(format!("length mismatch {} vs {}", a.len(), b.len())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_values() {
        assert_eq!(rms_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let r = rms_error(&[3.0, 4.0], &[0.0, 0.0]).unwrap();
        assert!((r - (12.5f64).sqrt()).abs() < 1e-15);
        assert!(rel_l2_error(&[1.0], &[0.0]).is_err());
        assert!(rms_error(&[1.0], &[1.0, 2.0]).is_err());
    }
}
