//! Drive the command-line front end in-process.
fn main() {
    let out = std::env::temp_dir().join("multidre-cli-example");
    let code = multidre::cli::run([
        "multidre",
        "verify-theory",
        "--trials",
        "50",
        "--seed",
        "7",
        "--out",
        out.to_str().expect("utf-8 temp path"),
    ]);
    println!("exit code {code}; run record in {}", out.join("run.json").display());
}
