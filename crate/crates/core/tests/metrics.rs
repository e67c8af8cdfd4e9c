mod common;

#[test]
fn metric_examples() {
    let summary = common::metric_examples_check().unwrap();
    println!("{summary}");
}
