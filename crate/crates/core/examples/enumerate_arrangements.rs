//! Lists the hyperplane arrangement patterns of a tiny dataset and grows
//! them one layer deeper.

use threshconvex::arrangements::{count_bound, deep_construct, enumerate_exact, write_text, DEFAULT_BUDGET};
use threshconvex::model::Dataset;

fn main() -> threshconvex::Result<()> {
    let data = Dataset::from_rows(&[vec![-1.0, 1.0], vec![0.0, 1.0], vec![1.0, 1.0]], &[0.0, 1.0, 1.0])?;
    let first = enumerate_exact(&data)?;
    println!("first layer: {} patterns (bound {})", first.p(), count_bound(3, 2)?);
    for p in first.patterns() {
        let w = p.witness.as_ref().map(|w| w.weights.clone()).unwrap_or_default();
        println!("  {}  witness {:?}", p.bits, w);
    }

    let second = deep_construct(&first, 2, DEFAULT_BUDGET)?;
    println!("second layer (width 2): {} patterns", second.p());
    write_text(&second, std::io::stdout().lock()).expect("stdout");
    Ok(())
}
