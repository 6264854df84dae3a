//! Writing a dataset to CSV and reading it back.
//!
//! `cargo run --example dataset_io`

use structcorr::io::{read_dataset, write_dataset};

fn main() -> structcorr::Result<()> {
    let text = "\
subject,time,SOL,VL,BB,DEL
p01,1,0.12,0.30,NA,0.05
p02,1,0.08,,0.22,0.11
p01,3,0.19,0.41,0.10,0.07
";
    let data = read_dataset(text.as_bytes())?;
    for s in &data.subjects {
        println!("{}: {} times, {} observed cells", s.id, s.n_times(), s.observed_indices().len());
    }
    let mut out = Vec::new();
    write_dataset(&data, &mut out)?;
    print!("\n{}", String::from_utf8_lossy(&out));
    assert_eq!(read_dataset(out.as_slice())?, data);
    Ok(())
}
