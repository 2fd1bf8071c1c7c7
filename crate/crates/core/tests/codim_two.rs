use lightcone_core::blaschke::darboux_integrate;
use lightcone_core::detectors::isothermic_test;
use lightcone_core::{frame_at, parse_chart, Grid, PairThresholds, Thresholds};

fn twisted() -> lightcone_core::SurfaceChart {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/twisted_lightcone.toml")).unwrap();
    parse_chart(&text).unwrap()
}

#[test]
fn frame_identities_in_codimension_two() {
    let c = twisted();
    assert_eq!(c.normal_rank(), 2);
    for (u, v) in [(0.0, 0.0), (0.2, -0.15), (-0.2, 0.24)] {
        let f = frame_at(&c, u, v).unwrap();
        assert!(f.normalization_residuals().max() < 1e-10);
        assert!(f.structure_residuals().max() < 1e-8, "{:?}", f.structure_residuals());
        let r = f.integrability_residuals();
        for name in ["gauss_u", "gauss_v", "codazzi", "ricci_reversed"] {
            assert!(r.get(name).unwrap() < 1e-7, "{name}: {r:?}");
        }
        // the curvature term with the sign as usually printed does not vanish here
        assert!(r.get("ricci").unwrap() > 1e-3);
    }
}

#[test]
fn not_isothermic() {
    let c = twisted();
    let g = Grid::interior(c.domain, 6, 6, 0.1).unwrap();
    let r = isothermic_test(&c, &g, Thresholds::default()).unwrap();
    println!("parallel {:e} separability {:e}", r.parallel_residual, r.separability_residual);
    assert!(r.sign.is_none());
    assert!(r.parallel_residual.max(r.separability_residual) > 1e-3);
}

#[test]
fn darboux_system_is_incompatible() {
    let c = twisted();
    let g = Grid::new(21, 21, [0.0, 0.25, 0.0, 0.25]).unwrap();
    let r = darboux_integrate(&c, 1.0, 1, &[0.0, 0.0, 0.0, 0.0], &g, PairThresholds::default()).unwrap();
    println!("compatibility {:e}", r.compatibility);
    assert!(r.compatibility > 1e-3);
}
