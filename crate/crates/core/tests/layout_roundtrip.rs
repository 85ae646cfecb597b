mod common;

use proptest::prelude::*;
use synclay::{compute_bbox, Canvas, Cell};

#[test]
fn painted_rectangles_extract_back() {
    let (worst, mismatched) = common::criteria::layout_round_trip(100, 17);
    assert!(worst <= 0.5, "worst centroid error {worst}");
    assert_eq!(mismatched, 0);
}

#[test]
fn synthesized_layouts_never_overlap() {
    let (overlaps, worst) = common::criteria::synthesized_overlap(50, 23);
    assert_eq!(overlaps, 0);
    assert!(worst <= 4.0, "epithelial cell {worst} px from a gland");
}

proptest! {
    #[test]
    fn clipped_boxes_stay_valid(
        x in 0.0f64..=1.0,
        y in 0.0f64..=1.0,
        side in 1u32..300,
        w in 1u32..300,
        h in 1u32..300,
    ) {
        let canvas = Canvas::square(side);
        let cell = Cell::seeded(0, x, y, w.min(side), h.min(side), 0);
        let b = compute_bbox(&cell, canvas).unwrap();
        prop_assert!(b.x0 < b.x1 && b.x1 <= side);
        prop_assert!(b.y0 < b.y1 && b.y1 <= side);
    }
}
