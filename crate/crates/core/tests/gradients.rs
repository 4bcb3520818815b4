use fredn_core::gradcheck::gradcheck_tiny;
use fredn_core::losses::LossKind;
use fredn_core::model::Variant;

#[test]
fn all_variants_all_losses() {
    for variant in Variant::ALL {
        for loss in LossKind::ALL {
            let r = gradcheck_tiny(variant, loss, 7).unwrap();
            println!(
                "{variant:>14} {loss:>9} checked {:>5} max rel err {:.2e} at {} ({:.3e} vs {:.3e})",
                r.checked, r.max_rel_err, r.worst_param, r.worst_analytic, r.worst_numeric
            );
            assert!(r.passes(1e-4), "{variant} {loss}: {r:?}");
        }
    }
}
