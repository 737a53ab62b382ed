use nlsp_cli::config::{parse_config, Command, ConfigError, Expect, Init, Knobs};

fn key_of(e: &ConfigError) -> &str {
    match e {
        ConfigError::Range { key, .. } | ConfigError::Missing { key } | ConfigError::Type { key, .. } => key,
        ConfigError::UnknownKey { key, .. } | ConfigError::Unused { key, .. } => key,
        _ => "",
    }
}

#[test]
fn minimal_eig_config_gets_defaults() {
    let c = parse_config("[model]\nd = 3\nsigma = 1\n", Some(Command::Eig)).unwrap();
    assert_eq!(c.res.n, 16384);
    assert_eq!(c.res.r_max, 40.0);
    assert_eq!(c.echo["grid.n"], 16384);
    assert_eq!(c.echo["grid.r_max"], 40.0);
    assert_eq!(c.echo["model.coupling"], 1.0);
    assert_eq!(c.params.alpha(), 4.0 / 3.0);
    assert_eq!(c.knobs, Knobs::Eig);
    assert!(!c.echo.contains_key("run.seed"));
}

#[test]
fn sigma_out_of_range_names_the_key() {
    let e = parse_config("[model]\nd = 3\nsigma = 2.5\n", Some(Command::Eig)).unwrap_err();
    assert!(matches!(e, ConfigError::Range { .. }));
    assert_eq!(key_of(&e), "model.sigma");
    assert!(e.to_string().contains("model.sigma"));
    let e = parse_config("[model]\nd = 1\nsigma = 1\n", Some(Command::Eig)).unwrap_err();
    assert_eq!(key_of(&e), "model.sigma");
}

#[test]
fn duplicate_key_is_a_syntax_error_on_its_line() {
    let e = parse_config("[model]\nd = 3\n\nsigma = 0.5\n# again\nsigma = 0.6\n", Some(Command::Eig)).unwrap_err();
    assert!(matches!(e, ConfigError::Syntax { line: 6, .. }), "{e:?}");
    assert!(e.to_string().contains("sigma"), "{e}");
}

#[test]
fn unknown_and_misplaced_keys_are_errors() {
    let e = parse_config("[model]\nd = 3\nsigma = 1\nsgima = 1\n", Some(Command::Eig)).unwrap_err();
    assert!(matches!(e, ConfigError::UnknownKey { line: 4, .. }));
    assert_eq!(key_of(&e), "model.sgima");
    // A real key in the wrong section.
    let e = parse_config("[grid]\nd = 3\n", Some(Command::Eig)).unwrap_err();
    assert_eq!(key_of(&e), "grid.d");
    // A real key the command does not use.
    let e = parse_config("[model]\nd = 3\nsigma = 1\n[run]\ndt = 0.1\n", Some(Command::Eig)).unwrap_err();
    assert!(matches!(e, ConfigError::Unused { line: 5, .. }));
    assert!(parse_config("[nope]\n", Some(Command::Eig)).is_err());
    // A bare number is a list of one; a profile list may be a single path.
    let c = parse_config("[model]\nd = 3\nsigma = 0.5\nalpha = 2\n[run]\nomega = 1\nprofile = [\"a.prof\", \"b.prof\"]\n", Some(Command::Classify)).unwrap();
    assert!(matches!(&c.knobs, Knobs::Classify { profiles, .. } if profiles.len() == 2));
}

#[test]
fn missing_and_mistyped_values() {
    let e = parse_config("[model]\nd = 3\n", Some(Command::Eig)).unwrap_err();
    assert_eq!(e, ConfigError::Missing { key: "model.sigma".into() });
    let e = parse_config("[model]\nd = \"three\"\nsigma = 1\n", Some(Command::Eig)).unwrap_err();
    assert!(matches!(e, ConfigError::Type { line: 2, .. }));
    assert_eq!(key_of(&e), "model.d");
    let e = parse_config("[model]\nd = 2.5\nsigma = 1\n", Some(Command::Eig)).unwrap_err();
    assert_eq!(key_of(&e), "model.d");
    // Not TOML at all.
    let e = parse_config("[model]\nd = three\n", Some(Command::Eig)).unwrap_err();
    assert!(matches!(e, ConfigError::Syntax { line: 2, .. }), "{e:?}");
    let e = parse_config("[model]\nd = 3\nsigma = 0.5\nalpha = 1\n", Some(Command::GroundState)).unwrap_err();
    assert_eq!(key_of(&e), "run.omega");
    let e = parse_config("[model]\nd = 3\nsigma = 0.5\nalpha = 1\n[run]\nomega = 1\nsolver = \"newton\"\n", Some(Command::GroundState)).unwrap_err();
    assert_eq!(key_of(&e), "run.solver");
}

#[test]
fn model_preconditions_are_checked_up_front() {
    // α ≥ 4/(d-2) in d = 3.
    let e = parse_config("[model]\nd = 3\nsigma = 0.5\nalpha = 4\n", Some(Command::Eig)).unwrap_err();
    assert_eq!(key_of(&e), "model.alpha");
    let e = parse_config("[model]\nd = 3\nsigma = 0.5\ncoupling = -1\n", Some(Command::Eig)).unwrap_err();
    assert_eq!(key_of(&e), "model.coupling");
    let e = parse_config("[model]\nd = 2\nsigma = 0.5\nalpha = 1.5\n", Some(Command::CriticalSweep)).unwrap_err();
    assert_eq!(key_of(&e), "model.alpha");
    let e = parse_config("[model]\nd = 2\nsigma = 0.5\n[run]\na_fractions = [0.5, 1.2]\n", Some(Command::CriticalSweep)).unwrap_err();
    assert_eq!(key_of(&e), "run.a_fractions");
    let e = parse_config("[model]\nd = 2\nsigma = 0.5\n[grid]\nn = 8\n", Some(Command::Eig)).unwrap_err();
    assert_eq!(key_of(&e), "grid.n");
    let e = parse_config("[model]\nd = 2\nsigma = 0.5\nalpha = 1\n[run]\na = 1\ntrials = 0\n", Some(Command::Stability)).unwrap_err();
    assert_eq!(key_of(&e), "run.trials");
}

#[test]
fn command_in_text_and_on_the_command_line() {
    let text = "command = \"eig\"\n[model]\nd = 3\nsigma = 1\n";
    assert_eq!(parse_config(text, None).unwrap().command, Command::Eig);
    assert_eq!(parse_config(text, Some(Command::Eig)).unwrap().command, Command::Eig);
    assert!(matches!(parse_config(text, Some(Command::Evolve)), Err(ConfigError::CommandMismatch { .. })));
    assert!(matches!(parse_config("[model]\nd = 3\nsigma = 1\n", None), Err(ConfigError::Missing { .. })));
}

#[test]
fn evolve_knobs() {
    let text = "[model]\nd = 3\nsigma = 0.5\nalpha = 2\n[run]\ninit = \"ground_state\"\nomega = 1\nlambda = 1.2\nmu = 0.99 # scaled\nexpect = \"blowup\"\nseed = 7\n";
    let c = parse_config(text, Some(Command::Evolve)).unwrap();
    assert_eq!(c.seed, 7);
    match &c.knobs {
        Knobs::Evolve { omega, init, expect, dt, t_end, .. } => {
            assert_eq!(*omega, Some(1.0));
            assert_eq!(*init, Init::GroundState { lambda: 1.2, mu: 0.99 });
            assert_eq!(*expect, Expect::BlowUp);
            assert_eq!((*dt, *t_end), (1e-3, 10.0));
        }
        k => panic!("{k:?}"),
    }
    assert_eq!(c.clone().with_seed(9).echo["run.seed"], 9);
    // ω only makes sense for the ground-state datum.
    let e = parse_config("[model]\nd = 3\nsigma = 0.5\nalpha = 2\n[run]\nomega = 1\n", Some(Command::Evolve)).unwrap_err();
    assert_eq!(key_of(&e), "run.omega");
}

#[test]
fn lists_parse_item_by_item() {
    let c = parse_config("[model]\nd = 2\nsigma = 0.5\n[run]\na_fractions = [0.9, 0.99]\ntau = [2, 4]\n", Some(Command::CriticalSweep)).unwrap();
    match c.knobs {
        Knobs::CriticalSweep { fractions, tau, .. } => {
            assert_eq!(fractions, vec![0.9, 0.99]);
            assert_eq!(tau, vec![2.0, 4.0]);
        }
        k => panic!("{k:?}"),
    }
    let e = parse_config("[model]\nd = 2\nsigma = 0.5\n[run]\ntau = [2, \"x\"]\n", Some(Command::CriticalSweep)).unwrap_err();
    assert_eq!(key_of(&e), "run.tau");
}
