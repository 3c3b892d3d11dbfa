// SPDX-License-Identifier: Apache-2.0

//! The encrypted computations each party performs, free of any transport.

use nalgebra::DMatrix;
use rayon::prelude::*;
use vfl_he::encoding::{add_encrypted, dot_plain, encode, encode_integer, encrypt, mul_plain_encrypted, sum_encrypted};
use vfl_he::{Base, EncodedNumber, EncryptedNumber, PublicKey};

use crate::error::{ProtocolError, Result};

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(ProtocolError::Dimension(format!("{what}: got {got}, expected {want}")));
    }
    Ok(())
}

fn encode_all(values: &[f64], pk: &PublicKey, base: Base) -> Result<Vec<EncodedNumber>> {
    Ok(values.par_iter().map(|&v| encode(v, pk, base)).collect::<vfl_he::Result<_>>()?)
}

fn row_dot(x: &DMatrix<f64>, i: usize, theta: &[f64]) -> f64 {
    x.row(i).iter().zip(theta).map(|(a, b)| a * b).sum()
}

/// `X[rows, j]ᵀ <w>` for every column `j` of `x`.
fn transpose_times(
    pk: &PublicKey,
    base: Base,
    x: &DMatrix<f64>,
    rows: &[usize],
    w: &[EncryptedNumber],
) -> Result<Vec<EncryptedNumber>> {
    check_len("encrypted vector", w.len(), rows.len())?;
    (0..x.ncols())
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|&i| x[(i, j)]).collect();
            Ok(dot_plain(pk, w, &encode_all(&col, pk, base)?)?)
        })
        .collect()
}

/// `<m_i> * q_i` for each listed row, re-randomized.
fn mask_times(
    pk: &PublicKey,
    base: Base,
    mask: &[EncryptedNumber],
    rows: &[usize],
    q: &[f64],
) -> Result<Vec<EncryptedNumber>> {
    rows.par_iter().zip(q).map(|(&i, &v)| Ok(mul_plain_encrypted(pk, &mask[i], &encode(v, pk, base)?)?)).collect()
}

fn pick(mask: &[EncryptedNumber], rows: &[usize]) -> Vec<EncryptedNumber> {
    rows.iter().map(|&i| mask[i].clone()).collect()
}

/// Encrypts mask bits at the fixed exponent 0.
pub fn encrypt_mask(pk: &PublicKey, base: Base, mask: &[bool]) -> Result<Vec<EncryptedNumber>> {
    Ok(mask
        .par_iter()
        .map(|&m| encrypt(pk, &encode_integer(i64::from(m), pk, base)?))
        .collect::<vfl_he::Result<_>>()?)
}

/// A's side of the loss initialization: `<m ∘ y>_H` and
/// `<u> = (1/h) X_{A,H}ᵀ <m ∘ y>_H`. Returns `(<u>, <m ∘ y>_H)`.
pub fn holdout_init_a(
    pk: &PublicKey,
    base: Base,
    mask: &[EncryptedNumber],
    x_a: &DMatrix<f64>,
    y: &[f64],
    hold: &[usize],
) -> Result<(Vec<EncryptedNumber>, Vec<EncryptedNumber>)> {
    if hold.is_empty() {
        return Err(ProtocolError::Config("hold-out size must be positive".into()));
    }
    let my: Vec<EncryptedNumber> = hold
        .par_iter()
        .map(|&i| mul_plain_encrypted(pk, &mask[i], &encode_integer(y[i] as i64, pk, base)?))
        .collect::<vfl_he::Result<_>>()?;
    let inv_h = encode(1.0 / hold.len() as f64, pk, base)?;
    let mu_a = transpose_times(pk, base, x_a, hold, &my)?
        .iter()
        .map(|c| mul_plain_encrypted(pk, c, &inv_h))
        .collect::<vfl_he::Result<_>>()?;
    Ok((mu_a, my))
}

/// B's side: completes `<µ_H> = [<u>; (1/h) X_{B,H}ᵀ <m ∘ y>_H]`.
pub fn holdout_init_b(
    pk: &PublicKey,
    base: Base,
    x_b: &DMatrix<f64>,
    hold: &[usize],
    mu_a: Vec<EncryptedNumber>,
    my: &[EncryptedNumber],
) -> Result<Vec<EncryptedNumber>> {
    if hold.is_empty() {
        return Err(ProtocolError::Config("hold-out size must be positive".into()));
    }
    let inv_h = encode(1.0 / hold.len() as f64, pk, base)?;
    let mut mu_h = mu_a;
    for c in transpose_times(pk, base, x_b, hold, my)? {
        mu_h.push(mul_plain_encrypted(pk, &c, &inv_h)?);
    }
    Ok(mu_h)
}

/// A's first gradient step: `<u'_i> = <m_i> (θ_A·x_{A,i}/4 - y_i/2)`.
pub fn gradient_partial_a(
    pk: &PublicKey,
    base: Base,
    mask: &[EncryptedNumber],
    x_a: &DMatrix<f64>,
    y: &[f64],
    rows: &[usize],
    theta_a: &[f64],
) -> Result<Vec<EncryptedNumber>> {
    let q: Vec<f64> = rows.iter().map(|&i| 0.25 * row_dot(x_a, i, theta_a) - 0.5 * y[i]).collect();
    mask_times(pk, base, mask, rows, &q)
}

/// B's step: `<w_i> = <u'_i> + <m_i> θ_B·x_{B,i}/4` and `<z> = X_Bᵀ <w>`.
pub fn gradient_b(
    pk: &PublicKey,
    base: Base,
    mask: &[EncryptedNumber],
    x_b: &DMatrix<f64>,
    rows: &[usize],
    theta_b: &[f64],
    u: &[EncryptedNumber],
) -> Result<(Vec<EncryptedNumber>, Vec<EncryptedNumber>)> {
    check_len("<u'>", u.len(), rows.len())?;
    let q: Vec<f64> = rows.iter().map(|&i| 0.25 * row_dot(x_b, i, theta_b)).collect();
    let mine = mask_times(pk, base, mask, rows, &q)?;
    let w: Vec<EncryptedNumber> =
        u.iter().zip(&mine).map(|(a, b)| add_encrypted(pk, a, b)).collect::<vfl_he::Result<_>>()?;
    let z = transpose_times(pk, base, x_b, rows, &w)?;
    Ok((w, z))
}

/// A's last step: `<z'> = X_Aᵀ <w>`.
pub fn gradient_parts_a(
    pk: &PublicKey,
    base: Base,
    x_a: &DMatrix<f64>,
    rows: &[usize],
    w: &[EncryptedNumber],
) -> Result<Vec<EncryptedNumber>> {
    transpose_times(pk, base, x_a, rows, w)
}

/// A's loss step: `<m ∘ u>_H` with `u_i = θ_A·x_{A,i}` and
/// `<u'> = (1/8h) Σ_H u_i² <m_i>`.
pub fn loss_partial_a(
    pk: &PublicKey,
    base: Base,
    mask: &[EncryptedNumber],
    x_a: &DMatrix<f64>,
    hold: &[usize],
    theta_a: &[f64],
) -> Result<(Vec<EncryptedNumber>, EncryptedNumber)> {
    let h = hold.len() as f64;
    let u: Vec<f64> = hold.iter().map(|&i| row_dot(x_a, i, theta_a)).collect();
    let mu = mask_times(pk, base, mask, hold, &u)?;
    let coef: Vec<f64> = u.iter().map(|v| v * v / (8.0 * h)).collect();
    let quad = dot_plain(pk, &pick(mask, hold), &encode_all(&coef, pk, base)?)?;
    Ok((mu, quad))
}

/// B's loss step: `<ℓ> = <u'> + (1/8h) Σ_H v_i² <m_i> + (1/4h) Σ_H v_i <m_i u_i>
/// - θ·<µ_H>/2` with `v_i = θ_B·x_{B,i}`.
#[allow(clippy::too_many_arguments)]
pub fn loss_total_b(
    pk: &PublicKey,
    base: Base,
    mask: &[EncryptedNumber],
    x_b: &DMatrix<f64>,
    hold: &[usize],
    theta: &[f64],
    mu_h: &[EncryptedNumber],
    mu: &[EncryptedNumber],
    quad: EncryptedNumber,
) -> Result<EncryptedNumber> {
    check_len("<m ∘ u>", mu.len(), hold.len())?;
    check_len("<µ_H>", mu_h.len(), theta.len())?;
    let h = hold.len() as f64;
    let theta_b = &theta[theta.len() - x_b.ncols()..];
    let v: Vec<f64> = hold.iter().map(|&i| row_dot(x_b, i, theta_b)).collect();
    let sq: Vec<f64> = v.iter().map(|x| x * x / (8.0 * h)).collect();
    let cross: Vec<f64> = v.iter().map(|x| x / (4.0 * h)).collect();
    let lin: Vec<f64> = theta.iter().map(|t| -0.5 * t).collect();
    let terms = [
        quad,
        dot_plain(pk, &pick(mask, hold), &encode_all(&sq, pk, base)?)?,
        dot_plain(pk, mu, &encode_all(&cross, pk, base)?)?,
        dot_plain(pk, mu_h, &encode_all(&lin, pk, base)?)?,
    ];
    Ok(sum_encrypted(pk, &terms)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::{masked_gradient_sum, masked_holdout_loss};
    use nalgebra::DVector;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use std::sync::OnceLock;
    use vfl_he::encoding::decrypt_f64;
    use vfl_he::{keygen_insecure_with_rng, PrivateKey};
    use vfl_learn::{hstack, mean_operator_normalized, Dataset};

    fn keys() -> &'static (PublicKey, PrivateKey) {
        static K: OnceLock<(PublicKey, PrivateKey)> = OnceLock::new();
        K.get_or_init(|| keygen_insecure_with_rng(512, &mut ChaCha20Rng::seed_from_u64(40)).unwrap())
    }

    struct Instance {
        xa: DMatrix<f64>,
        xb: DMatrix<f64>,
        data: Dataset,
        mask: Vec<bool>,
    }

    fn instance(n: usize, da: usize, db: usize, p_mask: f64, seed: u64) -> Instance {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let xa = DMatrix::from_fn(n, da, |_, _| rng.gen_range(-2.0..2.0));
        let xb = DMatrix::from_fn(n, db, |_, _| rng.gen_range(-2.0..2.0));
        let y = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let mask = (0..n).map(|_| rng.gen_bool(p_mask)).collect();
        let data = Dataset::new(hstack(&xa, &xb), y).unwrap();
        Instance { xa, xb, data, mask }
    }

    fn decrypt_vec(v: &[EncryptedNumber]) -> DVector<f64> {
        DVector::from_iterator(v.len(), v.iter().map(|c| decrypt_f64(&keys().1, c).unwrap()))
    }

    fn secure_gradient(inst: &Instance, theta: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
        let (pk, base) = (&keys().0, Base::DEFAULT);
        let m = encrypt_mask(pk, base, &inst.mask).unwrap();
        let da = inst.xa.ncols();
        let u = gradient_partial_a(pk, base, &m, &inst.xa, &inst.data.y, rows, &theta.as_slice()[..da]).unwrap();
        let (w, z) = gradient_b(pk, base, &m, &inst.xb, rows, &theta.as_slice()[da..], &u).unwrap();
        let za = gradient_parts_a(pk, base, &inst.xa, rows, &w).unwrap();
        let mut all = decrypt_vec(&za).as_slice().to_vec();
        all.extend(decrypt_vec(&z).iter());
        DVector::from_vec(all)
    }

    fn secure_loss(inst: &Instance, theta: &DVector<f64>, hold: &[usize]) -> f64 {
        let (pk, base) = (&keys().0, Base::DEFAULT);
        let m = encrypt_mask(pk, base, &inst.mask).unwrap();
        let da = inst.xa.ncols();
        let (mu_a, my) = holdout_init_a(pk, base, &m, &inst.xa, &inst.data.y, hold).unwrap();
        let mu_h = holdout_init_b(pk, base, &inst.xb, hold, mu_a, &my).unwrap();
        let (mu, quad) = loss_partial_a(pk, base, &m, &inst.xa, hold, &theta.as_slice()[..da]).unwrap();
        let l = loss_total_b(pk, base, &m, &inst.xb, hold, theta.as_slice(), &mu_h, &mu, quad).unwrap();
        decrypt_f64(&keys().1, &l).unwrap()
    }

    fn mu_h(inst: &Instance, hold: &[usize]) -> DVector<f64> {
        let (pk, base) = (&keys().0, Base::DEFAULT);
        let m = encrypt_mask(pk, base, &inst.mask).unwrap();
        let (mu_a, my) = holdout_init_a(pk, base, &m, &inst.xa, &inst.data.y, hold).unwrap();
        decrypt_vec(&holdout_init_b(pk, base, &inst.xb, hold, mu_a, &my).unwrap())
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn zero_model_all_ones_gradient_is_linear_term() {
        let mut inst = instance(12, 2, 3, 1.0, 1);
        inst.mask = vec![true; 12];
        let rows: Vec<usize> = (2..9).collect();
        let g = secure_gradient(&inst, &DVector::zeros(5), &rows);
        let mut want = DVector::zeros(5);
        for &i in &rows {
            want -= inst.data.row(i) * (0.5 * inst.data.y[i]);
        }
        assert!((g - want).amax() < 1e-12);
    }

    #[test]
    fn masked_out_batch_gives_zero_gradient() {
        let mut inst = instance(10, 2, 2, 0.5, 2);
        for i in 0..5 {
            inst.mask[i] = false;
        }
        let theta = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.1]);
        let g = secure_gradient(&inst, &theta, &[0, 1, 2, 3, 4]);
        assert_eq!(g, DVector::zeros(4));
    }

    #[test]
    fn holdout_mean_operator_cases() {
        let mut inst = instance(15, 2, 2, 0.6, 3);
        let hold: Vec<usize> = (0..15).collect();
        let m = mu_h(&inst, &hold);
        let want = mean_operator_normalized(&inst.data, Some(&crate::session::mask_weights(&inst.mask)), &hold);
        assert!((&m - &want).amax() < 1e-15 * want.amax().max(1.0));
        inst.mask = vec![true; 15];
        let full = mu_h(&inst, &hold);
        let want = mean_operator_normalized(&inst.data, None, &hold);
        assert!((full - want).amax() < 1e-15);
        inst.mask = vec![false; 15];
        assert_eq!(mu_h(&inst, &[1, 4, 7]), DVector::zeros(4));
    }

    #[test]
    fn loss_trivial_cases() {
        let mut inst = instance(10, 2, 1, 0.7, 4);
        let hold = [0, 3, 5, 9];
        assert_eq!(secure_loss(&inst, &DVector::zeros(3), &hold), 0.0);
        inst.mask = vec![false; 10];
        assert_eq!(secure_loss(&inst, &DVector::from_vec(vec![1.0, -2.0, 0.5]), &hold), 0.0);
    }

    #[test]
    fn empty_holdout_is_a_config_error() {
        let inst = instance(4, 1, 1, 1.0, 5);
        let (pk, base) = (&keys().0, Base::DEFAULT);
        let m = encrypt_mask(pk, base, &inst.mask).unwrap();
        assert!(matches!(holdout_init_a(pk, base, &m, &inst.xa, &inst.data.y, &[]), Err(ProtocolError::Config(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gradient_matches_plaintext(seed in any::<u64>(), n in 4usize..30, da in 1usize..4, db in 1usize..4, start in 0usize..4) {
            let inst = instance(n, da, db, 0.7, seed);
            let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 1);
            let theta = DVector::from_fn(da + db, |_, _| rng.gen_range(-3.0..3.0));
            let rows: Vec<usize> = (start.min(n - 1)..n).collect();
            let g = secure_gradient(&inst, &theta, &rows);
            let want = masked_gradient_sum(&theta, &inst.data, &inst.mask, &rows);
            prop_assert!((&g - &want).amax() <= 1e-12 * want.amax().max(1e-300));
        }

        #[test]
        fn loss_matches_plaintext(seed in any::<u64>(), n in 4usize..30, da in 1usize..4, db in 1usize..4, h in 1usize..4) {
            let inst = instance(n, da, db, 0.7, seed);
            let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 2);
            let theta = DVector::from_fn(da + db, |_, _| rng.gen_range(-3.0..3.0));
            let hold: Vec<usize> = (0..n).step_by(h).collect();
            let got = secure_loss(&inst, &theta, &hold);
            let want = masked_holdout_loss(&theta, &inst.data, &inst.mask, &hold);
            prop_assert!(got == want || rel(got, want) <= 1e-9, "{got} vs {want}");
        }
    }
}
