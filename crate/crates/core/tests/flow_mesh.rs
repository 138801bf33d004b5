use nalgebra::Matrix2;
use proptest::prelude::*;
use shapederiv_core::flow::{expansion_check, integrate_flow, inverse_flow, Point, VelocityField, Window, DEFAULT_STEPS};
use shapederiv_core::mesh::{transport_mesh, unit_square_mesh, MeshError, Side, TriMesh};

fn coeff() -> impl Strategy<Value = f64> {
    -0.5f64..0.5
}

fn affine_field() -> impl Strategy<Value = VelocityField> {
    (proptest::array::uniform4(coeff()), proptest::array::uniform2(coeff()))
        .prop_map(|(m, b)| VelocityField::affine([[m[0], m[1]], [m[2], m[3]]], b))
}

fn quadratic_field() -> impl Strategy<Value = VelocityField> {
    (proptest::array::uniform6(coeff()), proptest::array::uniform6(coeff()))
        .prop_map(|(a, b)| VelocityField::quadratic([a, b]))
}

fn any_field() -> impl Strategy<Value = VelocityField> {
    prop_oneof![
        affine_field(),
        quadratic_field(),
        coeff().prop_map(VelocityField::rotation),
        (quadratic_field(), 0.05f64..0.3).prop_map(|(f, w)| f.with_window(Window {
            lo: Point::new(0.3, 0.2),
            hi: Point::new(0.6, 0.7),
            width: w
        })),
    ]
}

fn point() -> impl Strategy<Value = Point> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y)| Point::new(x, y))
}

fn config() -> ProptestConfig {
    ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn jacobian_matches_central_differences(field in any_field(), x in point()) {
        let h = 1e-6;
        let mut fd = Matrix2::zeros();
        for c in 0..2 {
            let mut d = Point::zeros();
            d[c] = h;
            fd.set_column(c, &((field.evaluate(&(x + d)) - field.evaluate(&(x - d))) / (2.0 * h)));
        }
        prop_assert!((fd - field.jacobian(&x)).amax() <= 1e-6);
        prop_assert_eq!(field.divergence(&x), field.jacobian(&x).trace());
    }

    #[test]
    fn backward_flow_inverts_forward_flow(field in any_field(), x in point(), s in -0.2f64..0.2) {
        let fwd = integrate_flow(&field, &x, s, DEFAULT_STEPS).unwrap();
        let back = inverse_flow(&field, &fwd.point, s, DEFAULT_STEPS).unwrap();
        prop_assert!((back.point - x).norm() <= 1e-8);
        prop_assert!((fwd.det - fwd.jacobian.determinant()).abs() <= 1e-15 * fwd.det.abs().max(1.0));
    }

    #[test]
    fn divergence_free_fields_preserve_volume(a in coeff(), b in coeff(), c in coeff(), x in point(), s in -0.2f64..0.2) {
        for field in [VelocityField::affine([[a, b], [c, -a]], [0.1, 0.2]), VelocityField::rotation(a)] {
            let det = integrate_flow(&field, &x, s, DEFAULT_STEPS).unwrap().det;
            prop_assert!((det - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn expansions_are_second_order(field in prop_oneof![affine_field(), quadratic_field()], x in point()) {
        let r = expansion_check(&field, &x, &[1e-1, 1e-2, 1e-3], DEFAULT_STEPS).unwrap();
        prop_assert!(r.slope_r1.at_least(1.8), "{:?}", r);
        prop_assert!(r.slope_r2.at_least(1.8), "{:?}", r);
    }

    #[test]
    fn transport_preserves_structure_and_reverses(field in any_field(), n in 1usize..6, s in -0.2f64..0.2) {
        let mesh = unit_square_mesh(n, &[Side::Right, Side::Top]);
        let moved = transport_mesh(&mesh, &field, s, DEFAULT_STEPS).unwrap();
        prop_assert_eq!(moved.triangles(), mesh.triangles());
        prop_assert_eq!(moved.boundary(), mesh.boundary());
        prop_assert!((0..moved.triangles().len()).all(|t| moved.triangle_area(t) > 0.0));
        let back = transport_mesh(&moved, &field.reversed(), s, DEFAULT_STEPS).unwrap();
        for (p, q) in back.vertices().iter().zip(mesh.vertices()) {
            prop_assert!((p - q).norm() <= 1e-8);
        }
    }

    #[test]
    fn traceless_affine_transport_preserves_area(a in coeff(), b in coeff(), c in coeff(), s in -0.2f64..0.2) {
        let mesh = unit_square_mesh(4, &[]);
        let moved = transport_mesh(&mesh, &VelocityField::affine([[a, b], [c, -a]], [0.0, 0.3]), s, DEFAULT_STEPS).unwrap();
        prop_assert!((moved.total_area() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn text_format_round_trips(n in 1usize..5, s in -0.2f64..0.2, field in any_field()) {
        let mesh = transport_mesh(&unit_square_mesh(n, &[Side::Left]), &field, s, DEFAULT_STEPS).unwrap();
        prop_assert_eq!(TriMesh::from_text(&mesh.to_text()).unwrap(), mesh);
    }
}

#[test]
fn stretch_changes_area_by_exponential() {
    let mesh = unit_square_mesh(4, &[]);
    let s = 1e-2;
    let moved = transport_mesh(&mesh, &VelocityField::affine([[1.0, 0.0], [0.0, 0.0]], [0.0, 0.0]), s, DEFAULT_STEPS)
        .unwrap();
    assert!((moved.total_area() - s.exp()).abs() < 1e-6);
}

#[test]
fn transport_reports_folding() {
    let mesh = unit_square_mesh(2, &[]);
    // One RK4 step of length 2 for Λ = (-x₁², 0) gives ∂φ₁/∂x₁ = -3 at x₁ = 1.
    let squeeze = VelocityField::quadratic([[0.0, 0.0, 0.0, -1.0, 0.0, 0.0], [0.0; 6]]);
    let err = transport_mesh(&mesh, &squeeze, 2.0, 1).unwrap_err();
    assert!(matches!(err, MeshError::Flow(_) | MeshError::InvertedElement(..)), "{err:?}");
}
