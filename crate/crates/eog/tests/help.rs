//! `--help` output against files in tests/golden. Set EOG_UPDATE_GOLDEN=1 to
//! rewrite them.

use std::path::PathBuf;
use std::process::Command;

fn check(args: &[&str], golden: &str) {
    let o = Command::new(env!("CARGO_BIN_EXE_eog"))
        .args(args)
        .env_remove("COLUMNS")
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(golden);
    if std::env::var_os("EOG_UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &text).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e}; run with EOG_UPDATE_GOLDEN=1", path.display()));
    assert_eq!(text, want, "{golden} is stale");
}

#[test]
fn help_text() {
    check(&["--help"], "help.txt");
    for sub in ["sim", "investigate", "eval", "replay"] {
        check(&[sub, "--help"], &format!("help_{sub}.txt"));
    }
}
