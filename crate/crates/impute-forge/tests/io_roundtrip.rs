use impute_forge::io::{read_csv, write_csv};
use impute_forge_core::{Cell, ColumnKind, ColumnSchema, Dataset, Schema};
use proptest::prelude::*;

fn schema() -> Schema {
    Schema::new(vec![
        ColumnSchema::feature("age", ColumnKind::Numerical, "age in years"),
        ColumnSchema::feature("work class", ColumnKind::Categorical, "employer type, if known"),
        ColumnSchema::feature("hours", ColumnKind::Numerical, "hours per week"),
        ColumnSchema::target("income", "income bracket"),
    ])
    .unwrap()
}

fn category() -> impl Strategy<Value = Cell> {
    prop_oneof![
        Just(Cell::Missing),
        "[A-Za-z][A-Za-z0-9 ,\"-]{0,10}[A-Za-z0-9]".prop_map(Cell::Category),
    ]
}

fn number() -> impl Strategy<Value = Cell> {
    prop_oneof![
        Just(Cell::Missing),
        (-1.0e6f64..1.0e6).prop_map(Cell::Number),
        (-500i64..500).prop_map(|v| Cell::Number(v as f64)),
    ]
}

fn row() -> impl Strategy<Value = Vec<Cell>> {
    (number(), category(), number(), prop_oneof![Just("<=50K"), Just(">50K")])
        .prop_map(|(a, w, h, t)| vec![a, w, h, Cell::Category(t.to_string())])
}

proptest! {
    #[test]
    fn write_then_read_is_identity(rows in prop::collection::vec(row(), 1..30)) {
        let d = Dataset::new(schema(), rows, "generated").unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf, "?").unwrap();
        let back = read_csv(buf.as_slice(), schema(), &["?".to_string()], "generated").unwrap();
        prop_assert_eq!(back.rows(), d.rows());
        prop_assert_eq!(back.missing_mask(), d.missing_mask());
    }
}

#[test]
fn sentinels_and_blanks_are_missing() {
    let text = "age,work class,hours,income\n 39 , State-gov ,40,<=50K\n?,?,,>50K\n50,No Record,13,<=50K\n";
    let d = read_csv(
        text.as_bytes(),
        schema(),
        &["?".to_string(), "No Record".to_string()],
        "inline",
    )
    .unwrap();
    assert_eq!(d.cell(0, 1), &Cell::Category("State-gov".into()));
    assert_eq!(d.cell(0, 0), &Cell::Number(39.0));
    assert!(d.is_missing(1, 0) && d.is_missing(1, 1) && d.is_missing(1, 2));
    assert!(d.is_missing(2, 1));
    assert_eq!(d.total_missing(), 4);
}

#[test]
fn header_mismatch_is_rejected() {
    let text = "age,workclass,hours,income\n39,x,40,<=50K\n";
    assert!(read_csv(text.as_bytes(), schema(), &[], "inline").is_err());
}

#[test]
fn bad_number_is_rejected() {
    let text = "age,work class,hours,income\nforty,x,40,<=50K\n";
    let err = read_csv(text.as_bytes(), schema(), &[], "inline").unwrap_err();
    assert!(err.to_string().contains("forty"), "{err}");
}
