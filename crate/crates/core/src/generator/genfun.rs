use std::sync::Arc;

use super::{check_mode_counts, validate_rates, GeneratorMatrix, GeneratorParams};
use crate::error::Result;
use crate::spectral::{CreationRate, ModeBasis};
use crate::state::MultiIndexSpace;

/// Coefficient recursion obtained by expanding
///
/// `∂_t v = -Σ_k α_k z_k ∂_k v + (λ_d/2) ∂₀² v - (λ_d/2) Σ_{j,k} z_j z_k ∂_j ∂_k v
///          + Σ_k c_k z_k v - γ v`
///
/// on monomials `z^β`:
///
/// `(L c)_β = -(Σ_k α_k β_k) c_β + (λ_d/2)(β₀+2)(β₀+1) c_{β+2e₀}
///            - (λ_d/2)|β|(|β|-1) c_β + Σ_k c_k c_{β-e_k} - γ c_β`.
///
/// `c_{β+2e₀}` is dropped when `|β| + 2 > M`, which closes the hierarchy from
/// above.
pub fn assemble_from_genfun(
    space: Arc<MultiIndexSpace>,
    basis: &ModeBasis,
    creation: &CreationRate,
    lambda_d: f64,
) -> Result<GeneratorMatrix> {
    let gamma = creation.total_rate();
    validate_rates(gamma, lambda_d)?;
    check_mode_counts(&space, basis.num_modes(), creation.mode_coeffs().len())?;

    let alpha = basis.eigenvalues();
    let rate_coeffs = creation.mode_coeffs();
    let mut triplets = Vec::with_capacity(space.len() * (space.num_modes() + 2));
    let mut shifted = vec![0u32; space.num_modes()];

    for (row, beta) in space.iter().enumerate() {
        let degree: u32 = beta.iter().sum();
        let d = degree as f64;

        let diffusion: f64 = beta.iter().zip(alpha).map(|(&b, &a)| a * b as f64).sum();
        let diag = -diffusion - 0.5 * lambda_d * d * (d - 1.0) - gamma;
        triplets.push((row, row, diag));

        if lambda_d != 0.0 && degree as usize + 2 <= space.max_degree() {
            shifted.copy_from_slice(beta);
            shifted[0] += 2;
            let col = space.lookup(&shifted).expect("β + 2e₀ within degree cap");
            let b0 = beta[0] as f64;
            triplets.push((row, col, 0.5 * lambda_d * (b0 + 2.0) * (b0 + 1.0)));
        }

        for (k, &bk) in beta.iter().enumerate() {
            if bk == 0 || rate_coeffs[k] == 0.0 {
                continue;
            }
            shifted.copy_from_slice(beta);
            shifted[k] -= 1;
            let col = space.lookup(&shifted).expect("β - e_k within space");
            triplets.push((row, col, rate_coeffs[k]));
        }
    }

    let params = GeneratorParams {
        gamma,
        mode_coeffs: rate_coeffs.to_vec(),
        lambda_d,
        eigenvalues: alpha.to_vec(),
    };
    Ok(GeneratorMatrix::from_triplets(space, params, triplets))
}
