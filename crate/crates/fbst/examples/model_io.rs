//! The binary model format: save, reload, sidecar metadata, and corruption
//! detection via the embedded checksum.
//!
//! Run with: cargo run --example model_io

use fbst::filterbank::{load_model, save_model, write_sidecar};
use fbst::{init_transform, InitMode};

fn main() {
    let dir = std::env::temp_dir().join("fbst_model_io_example");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("demo.fbst");

    let bank = init_transform(4, 12, InitMode::RandomGaussian, 5, 16).unwrap();
    save_model(&bank, &path).unwrap();
    write_sidecar(
        &path,
        &[
            ("channels".into(), "12".into()),
            ("filter_size".into(), "4".into()),
            ("seed".into(), "5".into()),
        ],
    )
    .unwrap();
    println!("wrote {}", path.display());

    let reloaded = load_model(&path).unwrap();
    assert_eq!(&bank, &reloaded);
    println!(
        "reloaded: {} channels of {}x{} filters, fft grid {}",
        reloaded.num_channels(),
        reloaded.filter_size(),
        reloaded.filter_size(),
        reloaded.fft_size()
    );

    // Flip one payload bit: the loader must refuse the file.
    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x01;
    let corrupt_path = dir.join("corrupt.fbst");
    std::fs::write(&corrupt_path, &bytes).unwrap();
    match load_model(&corrupt_path) {
        Err(e) => println!("corrupted copy rejected: {e}"),
        Ok(_) => unreachable!("corruption must be detected"),
    }
}
