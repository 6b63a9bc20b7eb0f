//! L-ensemble from quality and similarity, its log-determinant and gradient
//! signs, and exact subset probabilities of the DPP it defines.
//!
//! cargo run --release --example dpp_ensemble

use nalgebra::DMatrix;
use rdpp::dpp::{dpp_log_prob, ridge_inverse, EnsembleMatrices, SubsetIndex, DEFAULT_EPS, DEFAULT_SIGN_TOL};

fn main() -> rdpp::Result<()> {
    // Items 0 and 1 are near duplicates; item 2 is distinct but weaker.
    let q = vec![2.0, 1.9, 1.2];
    let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.95, 0.1, 0.95, 1.0, 0.1, 0.1, 0.1, 1.0]);
    let ens = EnsembleMatrices::new(q, s, DEFAULT_EPS, DEFAULT_SIGN_TOL)?;
    println!("L = {:.3}", ens.l);
    println!("log det(L + eps I) = {:.4}", ens.log_det()?);
    println!("d log det / dL = (L + eps I)^-1 = {:.3}", ridge_inverse(&ens.l, ens.eps)?);
    println!("signs = {}", ens.signs);

    let mut subsets: Vec<(Vec<usize>, f64)> = (0..1u64 << 3)
        .map(|mask| {
            let sub = SubsetIndex::from_mask(mask, 3);
            let p = dpp_log_prob(&ens.l, &sub).map(f64::exp);
            (sub.indices().to_vec(), p)
        })
        .map(|(ix, p)| p.map(|p| (ix, p)))
        .collect::<rdpp::Result<_>>()?;
    subsets.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (ix, p) in &subsets {
        println!("P({ix:?}) = {p:.4}");
    }
    println!("total {:.12}", subsets.iter().map(|(_, p)| p).sum::<f64>());
    Ok(())
}
