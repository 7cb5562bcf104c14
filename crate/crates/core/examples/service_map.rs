//! Detects services in a repository tree listing and resolves paths.
//!
//! Pass a file with one path per line (for example `git ls-files > tree.txt`)
//! to use your own tree; the default is a polyglot demo layout.

use mlc::service_map::{autodetect_services, load_service_map, resolve_service, service_size, UNMAPPED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/polyglot_tree.txt").to_string());
    let tree: Vec<String> = std::fs::read_to_string(path)?.lines().map(str::to_string).collect();

    let map = autodetect_services(&tree)?;
    println!("detected {} services; mapping document:\n", map.services().len());
    print!("{}", map.to_document());

    println!("\nfiles per service:");
    for (service, count) in service_size(&map, &tree) {
        let marker = if service == UNMAPPED { "  (outside every service)" } else { "" };
        println!("  {service:<30} {count:>4}{marker}");
    }

    // hand-written maps are ordered: the first matching rule wins
    let manual = load_service_map(
        "# shared protos belong to the frontend team\n\
         {protos,src/frontend}/** => frontend\n\
         src/*service/** => backend\n",
    )?;
    println!();
    for p in ["protos/demo.proto", "src/frontend/main.go", "src/cartservice/Program.cs", "README.md"] {
        println!("{p:<30} -> {}", resolve_service(&manual, p).unwrap_or(UNMAPPED));
    }
    Ok(())
}
