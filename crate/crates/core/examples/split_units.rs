//! Splits a document at each granularity and shows that the pieces
//! reassemble to the original bytes.

use xbarrier::unitsplit::{reassemble, split, Granularity};

fn main() {
    let text = "The owl left at dawn. It carried a letter to the castle!\n\nNobody saw it return?";
    for g in [Granularity::Document, Granularity::Sentence, Granularity::Chunk(3)] {
        let seq = split(text, g);
        println!("{g}: {} units", seq.len());
        for (u, sep) in seq.units.iter().zip(&seq.separators) {
            println!("  [{}] {:?} + {:?}", u.index, u.text, sep);
        }
        assert_eq!(reassemble(&seq).unwrap(), text);
    }
}
