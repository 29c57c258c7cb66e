//! Analytic cost accounting against executed work and published reference counts.

use phantom_core::blocks::{Block, BlockSpec, ConvUnits, Init};
use phantom_core::netgraph::{builtin, count_costs, CostReport, Model};
use phantom_core::tensor::{CountingExec, Shape4, Tensor4};

fn spec(json: &str) -> BlockSpec {
    serde_json::from_str(json).unwrap()
}

#[test]
fn hand_computed_dense_and_depthwise() {
    let dense = Block::build(
        &spec(r#"{"kind":"Conv","args":{"out_c":32,"k":3}}"#),
        1,
        &[16],
        1,
        &mut Init::zeros(),
    )
    .unwrap();
    let (out, macs) = dense.trace(&[Shape4::new(1, 16, 32, 32)]).unwrap();
    assert_eq!(out[0], Shape4::new(1, 32, 32, 32));
    assert_eq!(dense.param_count(), 4672);
    assert_eq!(macs, 4_718_592);

    let dw = Block::build(
        &spec(r#"{"kind":"Conv","args":{"out_c":16,"k":3,"groups":16}}"#),
        1,
        &[16],
        1,
        &mut Init::zeros(),
    )
    .unwrap();
    assert_eq!(dw.param_count(), 176);
    assert_eq!(
        dw.trace(&[Shape4::new(1, 16, 32, 32)]).unwrap().1,
        32 * 32 * 16 * 9
    );
}

/// Each block kind: MACs from `trace` equal multiplications actually executed
/// by the instrumented reference convolution.
#[test]
fn traced_macs_equal_counted_multiplications() {
    let cases: [(&str, Vec<usize>); 9] = [
        (
            r#"{"kind":"Conv","args":{"out_c":12,"k":3,"s":2}}"#,
            vec![8],
        ),
        (
            r#"{"kind":"Conv","args":{"out_c":8,"k":5,"groups":4}}"#,
            vec![8],
        ),
        (
            r#"{"kind":"DWSeparable","args":{"out_c":10,"k":3}}"#,
            vec![6],
        ),
        (
            r#"{"kind":"GhostConv","args":{"out_c":8,"k":3,"s":2}}"#,
            vec![6],
        ),
        (
            r#"{"kind":"PhantomConv","args":{"out_c":16,"s":2}}"#,
            vec![8],
        ),
        (
            r#"{"kind":"C2f","args":{"out_c":8,"shortcut":true}}"#,
            vec![8],
        ),
        (r#"{"kind":"C2fi","args":{"out_c":12,"hidden":4}}"#, vec![8]),
        (r#"{"kind":"SPPF","args":{"out_c":8}}"#, vec![8]),
        (r#"{"kind":"Concat","args":{}}"#, vec![3, 5]),
    ];
    for (json, chans) in cases {
        let b = Block::build(&spec(json), 2, &chans, 1, &mut Init::seeded(1)).unwrap();
        let xs: Vec<Tensor4> = chans
            .iter()
            .enumerate()
            .map(|(i, &c)| Tensor4::random(Shape4::new(1, c, 12, 12), i as u64, -1.0, 1.0).unwrap())
            .collect();
        let refs: Vec<&Tensor4> = xs.iter().collect();
        let shapes: Vec<Shape4> = xs.iter().map(|x| x.shape()).collect();
        let exec = CountingExec::default();
        let y = b.forward(&refs, &exec).unwrap();
        let (out, macs) = b.trace(&shapes).unwrap();
        assert_eq!(exec.multiplications(), macs, "{json}");
        assert_eq!(out[0], y.shape(), "{json}");
    }
}

#[test]
fn whole_network_macs_equal_counted_multiplications() {
    for name in ["baseline", "phantom"] {
        let m = Model::random(builtin(name).unwrap(), 5).unwrap();
        let x = Tensor4::random(Shape4::new(1, 3, 64, 64), 9, 0.0, 1.0).unwrap();
        let exec = CountingExec::default();
        m.forward_with(&x, &exec).unwrap();
        assert_eq!(
            exec.multiplications(),
            m.cost_report(64).unwrap().macs,
            "{name}"
        );
    }
}

/// The reconstructed baseline is the YOLOv8n layout. The public model summary
/// reports 3,011,043 parameters for one class and 3,157,200 for 80, both
/// including the 16 fixed distribution-to-distance weights that are not
/// parameters here.
#[test]
fn baseline_matches_published_yolov8n_counts() {
    let g = builtin("baseline").unwrap();
    for (nc, published) in [(1, 3_011_043u64), (80, 3_157_200)] {
        let r = count_costs(&g.with_overrides(Some(nc), None).unwrap(), 640).unwrap();
        assert_eq!(r.params + 16, published, "nc={nc}");
    }
    // Published 8.7 GFLOPs at 640 for 80 classes.
    let r = count_costs(&g.with_overrides(Some(80), None).unwrap(), 640).unwrap();
    assert!((r.gflops() - 8.7).abs() < 0.05, "{}", r.gflops());
}

#[test]
fn builtin_ratios_within_tolerance() {
    let b = count_costs(&builtin("baseline").unwrap(), 640).unwrap();
    let p = count_costs(&builtin("phantom").unwrap(), 640).unwrap();
    let params = p.params as f64 / b.params as f64;
    let size = p.size_bytes as f64 / b.size_bytes as f64;
    let flops = p.flops as f64 / b.flops as f64;
    assert!(p.params < b.params);
    assert!((params - 0.57).abs() <= 0.05, "params ratio {params}");
    assert!((size - 0.57).abs() <= 0.05, "size ratio {size}");
    assert!((flops - 0.81).abs() <= 0.05, "flops ratio {flops}");
}

#[test]
fn report_json_round_trips() {
    let r = count_costs(&builtin("phantom").unwrap(), 320).unwrap();
    let back: CostReport = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn per_layer_rows_reflect_layer_specs() {
    let g = builtin("phantom").unwrap();
    let r = count_costs(&g, 640).unwrap();
    for (row, l) in r.per_layer.iter().zip(g.layers()) {
        assert_eq!(row.kind, l.kind().as_str());
        assert_eq!(row.from, l.from);
    }
    assert_eq!(r.per_layer[7].kind, "PhantomConv");
    assert_eq!(r.per_layer[19].kind, "PhantomConv");
}
