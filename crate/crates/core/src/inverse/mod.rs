//! Reconstruction of cell values from DtN data and empirical stability.

pub mod forward;
pub mod reconstruct;
pub mod stability;

pub use forward::ForwardModel;
pub use reconstruct::{reconstruct, Method, Reconstruction, ReconstructionProblem, TraceRow};
pub use stability::{
    estimate_lipschitz_constant, lattice_member, lattice_members, operator_noise, real_values, rondi_lower_bound,
    scaled_frobenius, stability_ratio, AdmissibleClass, LipschitzEstimate, RondiBound, Sampling, StabilityRecord,
    BOX, LATTICE_VALUES,
};

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rondi_bound_hand_value() {
        let b = rondi_lower_bound(8, 2, 1.0).unwrap();
        assert!((b.k1 - 3f64.ln().cbrt()).abs() < 1e-15);
        let expected = 0.25 * (3f64.ln().cbrt() * 2.0).exp();
        assert!((b.bound - expected).abs() < 1e-12);
        // independent evaluation of the closed form
        assert!((b.bound - 1.968_747_036_853_925_5).abs() < 1e-12);
        assert!((b.ln_net_count - 8.0 * 3f64.ln()).abs() < 1e-12);
        assert!(rondi_lower_bound(9, 2, 1.0).unwrap().bound > b.bound);
        assert!(rondi_lower_bound(0, 2, 1.0).is_err());
        assert!(rondi_lower_bound(8, 2, 0.0).is_err());
    }

    #[test]
    fn lattice_geometry() {
        for n in 1..=4 {
            let members = lattice_members(n).unwrap();
            assert_eq!(members.len(), 3usize.pow(n as u32));
            let mut min = f64::INFINITY;
            let mut distances = std::collections::BTreeSet::new();
            for (i, a) in members.iter().enumerate() {
                for b in &members[i + 1..] {
                    let d = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                    min = min.min(d);
                    distances.insert((d * 2.0) as u32);
                }
            }
            assert_eq!(min, 0.5);
            assert!(distances.iter().all(|&d| d == 1 || d == 2));
        }
    }
}
