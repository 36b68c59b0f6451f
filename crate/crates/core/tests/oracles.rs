//! Values computed independently with a plain dense NumPy diagonalization
//! of the chain Hamiltonian, and closed forms from free fermions.

use approx::assert_abs_diff_eq;
use spinflow_core::flow::{FlowConfig, FlowState};
use spinflow_core::model;
use spinflow_core::spectrum::KrylovOptions;
use spinflow_core::verify::chain_spectrum;
use spinflow_core::{Interval, ModelParams};

const AF7: [f64; 3] = [-6.200799974999873, -5.800799974999859, -4.228754938383389];
const FERRO7: [f64; 3] = [-8.8, -6.000200000001999, -6.000199999998];
const AF10: [f64; 3] = [-9.000002749999805, -9.00000274999979, -7.401734342207832];
const FERRO10: [f64; 3] = [-13.0, -10.20000050000001, -10.200000499999991];

fn cases() -> [(ModelParams, [f64; 3]); 4] {
    [
        (ModelParams::new(7, 3, -1.0, 0.2, 0.02), AF7),
        (ModelParams::new(7, 3, 1.0, 0.4, 0.02), FERRO7),
        (ModelParams::new(10, 3, -1.0, 0.2, 1e-3), AF10),
        (ModelParams::new(10, 3, 1.0, 0.4, 1e-3), FERRO10),
    ]
}

#[test]
fn chain_spectrum_matches_reference_values() {
    for (p, want) in cases() {
        let dense = chain_spectrum(&p, Some(3), 1 << 12, &KrylovOptions::default()).unwrap();
        let krylov = chain_spectrum(&p, Some(3), 1, &KrylovOptions::default()).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(dense[k], want[k], epsilon = 1e-11);
            assert_abs_diff_eq!(krylov[k], want[k], epsilon = 1e-9);
        }
    }
}

#[test]
fn final_block_matches_reference_values() {
    for (p, want) in cases() {
        let mut s = FlowState::new(p, FlowConfig { check_consistency: false, ..Default::default() }).unwrap();
        s.run().unwrap();
        let fin = s.finalize().unwrap();
        for (got, exp) in fin.p_minus_eigenvalues.iter().zip(want) {
            assert_abs_diff_eq!(*got, exp, epsilon = 1e-10);
        }
        assert!(fin.p_plus_bottom > fin.p_minus_eigenvalues.last().unwrap() + 1.0);
    }
}

#[test]
fn bare_potential_norm_is_free_fermion_energy() {
    // four sites, hopping 1/3: filling both positive modes 2/3 cos(π/5), 2/3 cos(2π/5)
    let lat = spinflow_core::MacroLattice::new(10, 3).unwrap();
    let v = model::v_interval(&lat, Interval::new(2, 1)).unwrap();
    assert_abs_diff_eq!(v.op_norm().unwrap(), 5f64.sqrt() / 3.0, epsilon = 1e-14);
}

#[test]
fn first_step_generator_is_first_order_at_small_coupling() {
    // On the block [1,5] of a Néel chain the bonds (1,2), (2,3), (3,4) of V
    // each flip one pair, costing 2|J| per outer bond made parallel:
    // 2, 4 and 4. Each reference column of Z/λ then has norm
    // (1/3) sqrt(1/4 + 1/16 + 1/16) = 1/sqrt(24), and the two columns live in
    // different magnetization sectors.
    let p = ModelParams::new(7, 3, -1.0, 0.2, 1e-6);
    let mut s = FlowState::new(p, FlowConfig::default()).unwrap();
    let r = s.apply_step().unwrap();
    assert_abs_diff_eq!(r.z_norm / p.lambda(), 24f64.sqrt().recip(), epsilon = 1e-5);
}
