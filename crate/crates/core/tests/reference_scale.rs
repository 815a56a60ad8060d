//! Desk-scale against full-scale reference on the box-potential problem.
//!
//! The full-scale run is 10^6 Strang steps at N = 16384, which takes hours on
//! a single core, so the test is ignored by default:
//! `cargo test --release --test reference_scale -- --ignored`.

use std::path::PathBuf;

use nlse_core::analysis::error_norms;
use nlse_core::harness::cache::{compute_reference, ReferenceRequest};
use nlse_core::harness::ReferenceSpec;
use nlse_core::physics::{InitialData, Nonlinearity, Potential};
use nlse_core::spectral::Grid;

fn request(spec: ReferenceSpec) -> ReferenceRequest {
    ReferenceRequest {
        grid: Grid::with_mesh(-16.0, 16.0, spec.h_e).unwrap(),
        tau_e: spec.tau_e,
        final_time: 1.0,
        potential: Potential::Box4,
        nonlinearity: Nonlinearity::cubic(-1.0),
        initial: InitialData::Gaussian,
        oversample_q: 16,
    }
}

#[test]
#[ignore = "hours of compute at full reference resolution"]
fn desk_reference_is_within_1e_5_of_full_scale() {
    let dir = std::env::var_os("NLSE_CACHE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("nlse-cache"));
    let desk = compute_reference(&request(ReferenceSpec::DESK), &dir).unwrap();
    let full = compute_reference(&request(ReferenceSpec::PAPER), &dir).unwrap();
    let diff = error_norms(&desk.field, &full.field, 0).unwrap();
    println!("L2 difference desk vs full-scale reference: {diff:e}");
    assert!(diff < 1e-5, "{diff:e}");
}
