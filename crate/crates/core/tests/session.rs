mod common;

use common::{fixture, queens_cells, replay, Action};
use proptest::prelude::*;
use sheetfd::grid::{CellAddr, Workbook};
use sheetfd::session::{Session, View};

fn action() -> impl Strategy<Value = Action> {
    prop_oneof![
        1 => Just(Action::Build),
        4 => Just(Action::Next),
        4 => Just(Action::Prev),
        2 => Just(Action::Original),
    ]
}

fn small() -> (Workbook, Vec<CellAddr>) {
    let wb = Workbook::from_cells([
        ("A1", "1..3"),
        ("B1", "[2,4]"),
        ("C1", ""),
        ("D1", "ssVarRanges(A1:C1)"),
        ("D2", "ssConstraintRanges(E1:E2)"),
        ("E1", "ssDomain(C1,0,1)"),
        ("E2", "A1 + C1 #\\= B1"),
    ]);
    (wb, (1..=3).map(|c| CellAddr::new(0, c, 1)).collect())
}

proptest! {
    #[test]
    fn small_model_overlay_invariant(actions in prop::collection::vec(action(), 1..40)) {
        let (wb, cells) = small();
        prop_assert_eq!(replay(&wb, &cells, &actions), Ok(()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn queens_overlay_invariant(actions in prop::collection::vec(action(), 1..25)) {
        prop_assert_eq!(replay(&fixture("queens8.json"), &queens_cells(), &actions), Ok(()));
    }
}

#[test]
fn queens_walkthrough() {
    let wb = fixture("queens8.json");
    let mut s = Session::new(wb.clone());
    let st = s.parse_build().unwrap();
    assert_eq!((st.solution_count, st.cursor, st.view), (92, 1, View::ShowingSolution));
    assert!(st.can_next && !st.can_prev);
    for _ in 0..100 {
        s.next_solution().unwrap();
    }
    assert_eq!(s.cursor(), 92);
    assert!(!s.can_next());
    s.original_state();
    assert_eq!(s.workbook(), &wb);
    assert_eq!(s.workbook().get(CellAddr::new(0, 1, 11)), Some("ssVarRanges(A1:H8)"));
}

#[test]
fn sudoku_single_solution_disables_navigation() {
    let mut s = Session::new(fixture("sudoku.json"));
    let st = s.parse_build().unwrap();
    assert_eq!(st.solution_count, 1);
    assert!(!st.can_next && !st.can_prev);
    assert!(s.workbook().get(CellAddr::new(0, 3, 1)).unwrap().parse::<i64>().is_ok());
}

#[test]
fn status_serializes_camel_case() {
    let mut s = Session::new(small().0);
    s.parse_build().unwrap();
    let v = serde_json::to_value(s.status()).unwrap();
    assert_eq!(v["view"], "showingSolution");
    assert_eq!(v["cursor"], 1);
    assert!(v["solutionCount"].as_u64().unwrap() > 1);
}
