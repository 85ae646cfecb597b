//! Settings resolve as flag, then environment, then config file, then
//! default. Kept in its own binary because it mutates the environment.

use clap::Parser;
use synclay_server::cli::{Cli, Command, ServeSettings, DEFAULT_PORT};

fn serve_settings(args: &[&str]) -> ServeSettings {
    let cli = Cli::try_parse_from([&["synclay", "serve"], args].concat()).unwrap();
    match cli.command {
        Command::Serve(a) => a.settings().unwrap(),
        other => panic!("parsed {other:?}"),
    }
}

#[test]
fn flags_beat_environment_beat_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("synclay.toml");
    std::fs::write(&file, "port = 9200\nhost = \"10.0.0.1\"\nstore = \"from-file.json\"\nworkers = 3\n").unwrap();
    let file = file.to_str().unwrap();
    for k in ["SYNCLAY_PORT", "SYNCLAY_HOST", "SYNCLAY_STORE", "SYNCLAY_WORKERS", "SYNCLAY_CONFIG", "SYNCLAY_CHECKPOINT"] {
        std::env::remove_var(k);
    }

    let none = serve_settings(&[]);
    assert_eq!((none.port, none.host.as_str(), none.store), (DEFAULT_PORT, "127.0.0.1", None));
    assert!(none.workers >= 1);

    let s = serve_settings(&["--config", file]);
    assert_eq!((s.port, s.host.as_str(), s.workers), (9200, "10.0.0.1", 3));
    assert_eq!(s.store.unwrap().to_str(), Some("from-file.json"));

    std::env::set_var("SYNCLAY_PORT", "9100");
    std::env::set_var("SYNCLAY_HOST", "0.0.0.0");
    let s = serve_settings(&["--config", file]);
    assert_eq!((s.port, s.host.as_str(), s.workers), (9100, "0.0.0.0", 3));

    let s = serve_settings(&["--config", file, "--port", "9000"]);
    assert_eq!((s.port, s.host.as_str()), (9000, "0.0.0.0"));

    std::env::set_var("SYNCLAY_CONFIG", file);
    std::env::remove_var("SYNCLAY_HOST");
    let s = serve_settings(&[]);
    assert_eq!((s.port, s.host.as_str()), (9100, "10.0.0.1"));

    std::env::set_var("SYNCLAY_PORT", "not-a-port");
    assert!(Cli::try_parse_from(["synclay", "serve"]).is_err());
    std::env::remove_var("SYNCLAY_PORT");
    std::env::remove_var("SYNCLAY_CONFIG");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.toml");
    std::fs::write(&file, "prot = 1\n").unwrap();
    let cli = Cli::try_parse_from(["synclay", "serve", "--config", file.to_str().unwrap()]).unwrap();
    let Command::Serve(a) = cli.command else { unreachable!() };
    assert!(a.settings().is_err());
}
