//! Turns the gold record of an event sentence into its score tables,
//! softens them into probabilities and decodes the record back.

use uniex::data::worked;
use uniex::structures::{build_target_tensor, cast_target, decode, DEFAULT_THRESHOLD};

fn main() -> uniex::Result<()> {
    let (schemas, doc) = worked::ace05_evt();
    let target = build_target_tensor(&doc.gold, &schemas, doc.tokens.len())?;
    for (r, name) in schemas.schema_names().enumerate() {
        let n = doc.tokens.len();
        let cells: Vec<(usize, usize)> =
            (0..n).flat_map(|p| (0..n).map(move |q| (p, q))).filter(|&(p, q)| target.value(r, p, q) == 1.0).collect();
        if !cells.is_empty() {
            println!("{name:<10} {cells:?}");
        }
    }
    let (record, diagnostics) = decode(&cast_target(&target, 0.2, 0.8), &schemas, DEFAULT_THRESHOLD);
    for e in &record.events {
        println!("event {} triggered by '{}'", e.label, doc.surface(e.trigger));
        for a in &e.arguments {
            println!("  {}: '{}'", a.role, doc.surface(a.span));
        }
    }
    assert_eq!(record, doc.gold.canonical());
    assert!(diagnostics.is_empty());
    println!("decoded record equals the gold record");
    Ok(())
}
