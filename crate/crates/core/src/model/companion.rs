use super::{NoiseFamily, SwitchingModel};
use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::markov::RegimeChain;

/// Stacks a switching VAR(p) with `k`-dimensional lag matrices into first
/// order form of dimension `k * p`.
///
/// The top block row carries the lag matrices, the block subdiagonal is the
/// identity, and both the noise scale and the mean shift act on the first
/// block only.
pub fn companion_embed(
    chain: RegimeChain,
    ar: &[Vec<Mat>],
    mu: &[Vector],
    sigma: &[Mat],
    noise: NoiseFamily,
) -> Result<SwitchingModel> {
    let r = chain.regimes();
    if ar.len() != r || mu.len() != r || sigma.len() != r {
        return Err(Error::InvalidModel(format!("need one AR block, mu and Sigma per regime ({r})")));
    }
    let order = ar[0].len();
    if order == 0 || ar.iter().any(|lags| lags.len() != order) {
        return Err(Error::InconsistentOrder);
    }
    let k = ar[0][0].nrows();
    let dim = k * order;
    let mut b = Vec::with_capacity(r);
    let mut s = Vec::with_capacity(r);
    let mut m = Vec::with_capacity(r);
    for i in 0..r {
        if ar[i].iter().any(|a| a.shape() != (k, k)) || sigma[i].shape() != (k, k) || mu[i].len() != k {
            return Err(Error::InvalidModel(format!("regime {} blocks must be {k}x{k}", i + 1)));
        }
        let mut top = Mat::zeros(dim, dim);
        for (lag, a) in ar[i].iter().enumerate() {
            top.view_mut((0, lag * k), (k, k)).copy_from(a);
        }
        for blk in 1..order {
            for d in 0..k {
                top[(blk * k + d, (blk - 1) * k + d)] = 1.0;
            }
        }
        b.push(top);
        let mut sig = Mat::zeros(dim, dim);
        sig.view_mut((0, 0), (k, k)).copy_from(&sigma[i]);
        s.push(sig);
        let mut shift = Vector::zeros(dim);
        shift.rows_mut(0, k).copy_from(&mu[i]);
        m.push(shift);
    }
    let model = SwitchingModel::new(chain, b)?.with_sigma(s)?.with_mu(m)?.with_noise(noise);
    Ok(model)
}

/// Scalar switching AR(p): `ar[i]` lists `a_1..a_p` for regime `i`.
pub fn companion_embed_scalar(
    chain: RegimeChain,
    ar: &[Vec<f64>],
    mu: &[f64],
    sigma: &[f64],
    noise: NoiseFamily,
) -> Result<SwitchingModel> {
    let blocks: Vec<Vec<Mat>> = ar
        .iter()
        .map(|lags| lags.iter().map(|&a| Mat::from_element(1, 1, a)).collect())
        .collect();
    let mu: Vec<Vector> = mu.iter().map(|&x| Vector::from_element(1, x)).collect();
    let sigma: Vec<Mat> = sigma.iter().map(|&x| Mat::from_element(1, 1, x)).collect();
    companion_embed(chain, &blocks, &mu, &sigma, noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::markov::InitLaw;

    #[test]
    fn ar1_is_itself() {
        let m = companion_embed_scalar(RegimeChain::trivial(), &[vec![0.7]], &[0.0], &[1.0], NoiseFamily::Gaussian).unwrap();
        assert_eq!(m.b[0], Mat::from_element(1, 1, 0.7));
    }

    #[test]
    fn fourth_order_layout() {
        let a = [0.2932, 0.1055, 0.0026, 0.3812];
        let chain = RegimeChain::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]], InitLaw::State(0)).unwrap();
        let m = companion_embed_scalar(chain, &[a.to_vec(), a.to_vec()], &[1.0, -0.5], &[1.0, 1.0], NoiseFamily::Gaussian)
            .unwrap();
        let expected = linalg::from_rows(&[
            vec![0.2932, 0.1055, 0.0026, 0.3812],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ]);
        assert_eq!(m.b[0], expected);
        assert_eq!(m.b[1], expected);
        assert_eq!(m.mu[1].as_slice(), &[-0.5, 0.0, 0.0, 0.0]);
        assert_eq!(m.sigma[0][(0, 0)], 1.0);
        assert_eq!(m.sigma[0].iter().filter(|&&x| x != 0.0).count(), 1);
    }

    #[test]
    fn zero_ar2_is_nilpotent() {
        let m = companion_embed_scalar(RegimeChain::trivial(), &[vec![0.0, 0.0]], &[0.0], &[1.0], NoiseFamily::Gaussian).unwrap();
        let b = &m.b[0];
        assert_ne!(b, &Mat::zeros(2, 2));
        assert_eq!(b * b, Mat::zeros(2, 2));
        assert!(linalg::spectral_radius(b) < 1e-12);
    }

    #[test]
    fn mismatched_orders_are_rejected() {
        let chain = RegimeChain::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]], InitLaw::State(0)).unwrap();
        let e = companion_embed_scalar(chain, &[vec![0.1], vec![0.1, 0.2]], &[0.0, 0.0], &[1.0, 1.0], NoiseFamily::Gaussian)
            .unwrap_err();
        assert!(matches!(e, Error::InconsistentOrder));
    }

    #[test]
    fn block_companion_for_vector_lags() {
        let a1 = linalg::from_rows(&[vec![0.1, 0.2], vec![0.3, 0.4]]);
        let a2 = linalg::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.6]]);
        let m = companion_embed(
            RegimeChain::trivial(),
            &[vec![a1.clone(), a2.clone()]],
            &[Vector::from_vec(vec![1.0, 2.0])],
            &[Mat::identity(2, 2)],
            NoiseFamily::Gaussian,
        )
        .unwrap();
        assert_eq!(m.dim, 4);
        assert_eq!(m.b[0].view((0, 0), (2, 2)), a1);
        assert_eq!(m.b[0].view((0, 2), (2, 2)), a2);
        assert_eq!(m.b[0].view((2, 0), (2, 2)), Mat::identity(2, 2));
        assert_eq!(m.mu[0].as_slice(), &[1.0, 2.0, 0.0, 0.0]);
    }
}
