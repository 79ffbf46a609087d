//! Regenerates `docs/catalog/*.tsv` from the compiled-in catalogs.
//!
//! `cargo run -p session-miner --example write_catalogs`

use std::path::Path;

use session_miner::FeatureCatalog;

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/catalog");
    std::fs::create_dir_all(&dir)?;
    for cat in [FeatureCatalog::intent_v1(), FeatureCatalog::knowledge_v1()] {
        let path = dir.join(format!("{}.tsv", cat.name()));
        std::fs::write(&path, cat.to_tsv())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
