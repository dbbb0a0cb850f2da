//! Load a weighted sequence file and print transversal summaries.
//!
//! ```text
//! cargo run --example summarize_data
//! ```

use medseq::seqdata::{parse_reader, CsvSchema, SequenceColumns};

const CSV: &str = "\
id,w,region,m1,m2,m3,m4,m5,m6
a,1.0,north,school,school,work,work,work,work
b,0.5,north,school,school,work,work,work,work
c,2.0,south,school,college,college,work,work,work
d,1.5,south,idle,idle,work,work,idle,idle
e,1.0,north,school,college,college,college,work,work
f,0.8,south,idle,idle,work,work,idle,idle
";

fn main() -> medseq::error::Result<()> {
    let mut schema = CsvSchema::new(SequenceColumns::Prefix("m".into()));
    schema.id = Some("id".into());
    schema.weight = Some("w".into());
    schema.covariates = vec!["region".into()];
    let ds = parse_reader(CSV.as_bytes(), &schema)?;

    println!("{} sequences of length {} over {:?}", ds.n(), ds.t(), ds.alphabet().labels());
    println!("normalised weights: {:?}", ds.weights());

    let dist = ds.state_distribution();
    println!("\nmonth  {}", ds.alphabet().labels().join("  "));
    for (t, row) in dist.rows().into_iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|p| format!("{p:.3}")).collect();
        println!("m{}     {}", t + 1, cells.join("  "));
    }
    println!("\nentropy by month: {:?}", ds.transversal_entropy());

    for g in ds.duplicate_groups().iter().filter(|g| g.size > 1) {
        println!(
            "{} appears {} times (weight {:.3})",
            medseq::seqdata::sps_encode(&g.sequence, ds.alphabet()),
            g.size,
            g.weight
        );
    }

    // Region is categorical: one indicator per non-reference level.
    let (x, names) = ds.design(&["region".to_string()])?;
    println!("\ndesign columns {names:?}, first row {:?}", x.row(0).to_vec());
    Ok(())
}
