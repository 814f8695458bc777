//! Hand-counted metric fixtures in `tests/fixtures`, written by
//! `make_fixtures.py` rather than the library.

use std::path::PathBuf;

use sfmchange::eval::{class_iou, eval_3d, miou, pair_iou, Confusion};
use sfmchange::io::{read_changes, read_mask};

fn path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// `(what, got, expected)` for every hand-counted quantity.
pub fn checks() -> Vec<(String, f64, f64)> {
    let mut out = Vec::new();
    let load = |n: &str| read_mask(&path(n)).unwrap();
    let pred = ["a", "b", "c"].map(|p| load(&format!("pred_{p}.pgm")));
    let truth = ["a", "b", "c"].map(|p| load(&format!("truth_{p}.pgm")));

    // a: changed 2 shared of 6 in either, unchanged 10 of 14.
    // b: empty changed class counts as 1. c: no overlap in either class.
    let classes = [(2.0 / 6.0, 10.0 / 14.0), (1.0, 1.0), (0.0, 0.0)];
    for (i, name) in ["a", "b", "c"].iter().enumerate() {
        let (c, u) = class_iou(&pred[i], &truth[i]).unwrap();
        out.push((format!("pair {name} changed IoU"), c, classes[i].0));
        out.push((format!("pair {name} unchanged IoU"), u, classes[i].1));
        out.push((format!("pair {name} pair IoU"), pair_iou(&pred[i], &truth[i]).unwrap(), (classes[i].0 + classes[i].1) / 2.0));
    }
    out.push(("mIOU".into(), miou(&pred, &truth).unwrap(), (11.0 / 21.0 + 1.0 + 0.0) / 3.0));

    let e = eval_3d(&read_changes(&path("pred_3d.ply")).unwrap(), &read_changes(&path("truth_3d.ply")).unwrap()).unwrap();
    let dis = Confusion { tp: 2, fp: 1, fn_: 1, tn: 2 };
    let app = Confusion { tp: 2, fp: 3, fn_: 0, tn: 3 };
    assert_eq!(e.disappeared.counts, dis);
    assert_eq!(e.appeared.counts, app);
    out.push(("disappeared precision".into(), e.disappeared.precision, 2.0 / 3.0));
    out.push(("disappeared recall".into(), e.disappeared.recall, 2.0 / 3.0));
    out.push(("appeared precision".into(), e.appeared.precision, 2.0 / 5.0));
    out.push(("appeared recall".into(), e.appeared.recall, 1.0));
    out.push(("combined precision".into(), e.combined.precision, 4.0 / 8.0));
    out.push(("combined recall".into(), e.combined.recall, 4.0 / 5.0));
    out.push(("combined F1".into(), e.combined.f1, 8.0 / 13.0));
    out
}
