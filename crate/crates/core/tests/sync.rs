use std::collections::BTreeMap;
use tempus::channels::{Channel, CovariantChoi, GradedKraus};
use tempus::clock::HamiltonianSpec;
use tempus::linalg::{self, c64, CMatrix, CVector};
use tempus::sync::{relative_fisher, relative_generator, sync_order, sync_to_clock, Synchronism};

fn qubit() -> HamiltonianSpec {
    HamiltonianSpec::ladder(2)
}

fn bell() -> CMatrix {
    let mut v = CVector::zeros(4);
    v[1] = c64(0.5f64.sqrt(), 0.0);
    v[2] = c64(0.5f64.sqrt(), 0.0);
    linalg::outer(&v)
}

fn sync_of(rho: CMatrix) -> Synchronism {
    Synchronism::new(rho, qubit(), qubit()).unwrap()
}

/// ½|Bell⟩⟨Bell| + ¼|00⟩⟨00| + ¼|11⟩⟨11|: half of the correlation replaced
/// by relative-energy-zero noise.
fn half_correlated() -> CMatrix {
    bell() * c64(0.5, 0.0) + linalg::diag_real(&[0.25, 0.0, 0.0, 0.25])
}

fn mix(a: &CovariantChoi, b: &CovariantChoi, p: f64) -> CovariantChoi {
    let mut blocks: BTreeMap<i64, CMatrix> = BTreeMap::new();
    for (weight, channel) in [(1.0 - p, a), (p, b)] {
        for (shift, block) in channel.nonzero_blocks() {
            let scaled = block * c64(weight, 0.0);
            blocks.entry(shift).and_modify(|m| *m += &scaled).or_insert(scaled);
        }
    }
    CovariantChoi::new(blocks, a.h_in().clone(), a.h_out().clone()).unwrap()
}

#[test]
fn bell_reaches_the_half_correlated_synchronism() {
    let source = sync_of(bell());
    let target = sync_of(half_correlated());
    assert!((relative_fisher(&source).unwrap() - 4.0).abs() < 1e-8);
    assert!((relative_fisher(&target).unwrap() - 2.0).abs() < 1e-8);

    let h = relative_generator(&qubit(), &qubit());
    let noise = linalg::diag_real(&[0.5, 0.0, 0.0, 0.5]);
    let witness = mix(
        &GradedKraus::identity(&h).to_choi().unwrap(),
        &GradedKraus::replacement(&noise, &h, &h).unwrap().to_choi().unwrap(),
        0.5,
    );
    assert!(witness.psd_residual() < 1e-12 && witness.tp_residual() < 1e-12);
    let out = witness.apply(source.rho()).unwrap();
    assert!(linalg::trace_norm(&(out - target.rho())) < 1e-12);

    let verdict = sync_order(&source, &target, 1e-6).unwrap();
    assert!(verdict.feasible, "{:?}", verdict.residuals);
    let found = verdict.witness_channel.unwrap();
    let reached = found.apply(sync_to_clock(&source).unwrap().rho()).unwrap();
    assert!(linalg::trace_norm(&(reached - target.rho())) <= 1e-6);
}

#[test]
fn bell_reaches_its_dephased_correlation() {
    let dephased = sync_of(linalg::diag_real(&[0.0, 0.5, 0.5, 0.0]));
    assert!(relative_fisher(&dephased).unwrap().abs() < 1e-12);
    assert!(sync_order(&sync_of(bell()), &dephased, 1e-6).unwrap().feasible);
}

#[test]
fn sync_order_is_reflexive() {
    for rho in [bell(), half_correlated(), linalg::diag_real(&[0.1, 0.2, 0.3, 0.4])] {
        let s = sync_of(rho);
        let verdict = sync_order(&s, &s, 1e-6).unwrap();
        assert!(verdict.feasible);
        assert_eq!(verdict.residuals.method, "identity");
    }
}

#[test]
fn uncorrelated_stationary_state_cannot_produce_bell() {
    let product = sync_of(linalg::kron(&linalg::diag_real(&[0.2, 0.8]), &linalg::diag_real(&[0.6, 0.4])));
    assert!(relative_fisher(&product).unwrap().abs() < 1e-12);
    let verdict = sync_order(&product, &sync_of(bell()), 1e-6).unwrap();
    assert!(!verdict.feasible);
    assert!(verdict.fidelity_achieved < 1.0 - 1e-3);
}
