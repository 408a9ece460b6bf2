use std::path::PathBuf;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tablesynth::domains::{builtin_domain, load_benchmark_dir, parse_benchmark, DomainError};
use tablesynth::dsl::exec_program;
use tablesynth::synth::{synthesize, Mode, SynthOutcome};
use tablesynth::synthetic::{linear_split_task, random_task, GeneratorConfig};

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks")
}

#[test]
fn corpus_loads_and_round_trips() {
    let cases = load_benchmark_dir(corpus()).unwrap();
    assert_eq!(cases.len(), 15);
    for (path, case) in &cases {
        let case = case
            .as_ref()
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let json = serde_json::to_string(&case.to_file()).unwrap();
        assert_eq!(&parse_benchmark(&json).unwrap(), case, "{}", path.display());
        if let Some(d) = builtin_domain(&case.domain) {
            assert!(d.action(&case.action.name).is_some());
            for t in &case.inputs {
                assert!(
                    d.entity_for(t.schema()).is_some(),
                    "{}: {}",
                    case.id,
                    t.name()
                );
            }
        }
    }
}

#[test]
fn expected_outputs_match_references() {
    for (_, case) in load_benchmark_dir(corpus()).unwrap() {
        let case = case.unwrap();
        let p = case.reference.as_ref().unwrap();
        let got = exec_program(p, &case.pending, &case.action).unwrap();
        assert_eq!(got, case.expected, "{}", case.id);
    }
}

#[test]
fn malformed_file_names_the_problem() {
    let err = parse_benchmark(r#"{"id": "x"}"#).unwrap_err();
    assert!(matches!(err, DomainError::Parse(_)), "{err}");
}

#[test]
fn forward_only_solutions_reproduce_examples() {
    for (_, case) in load_benchmark_dir(corpus()).unwrap() {
        let case = case.unwrap();
        if case.id.starts_with("linear-split") {
            continue;
        }
        let mut task = case.task();
        task.settings.mode = Mode::ForwardOnly;
        task.settings.timeout = Duration::from_secs(60);
        if let SynthOutcome::Solved(r) = synthesize(&task).unwrap() {
            assert_eq!(
                exec_program(&r.program, &case.inputs, &case.action).unwrap(),
                case.output
            );
        }
    }
}

#[test]
fn generated_tasks_are_solved_soundly() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..25 {
        let g = random_task(&mut rng, &GeneratorConfig::default());
        let out = synthesize(&g.task).unwrap();
        let p = out.program().expect("bounded task solved");
        assert_eq!(
            exec_program(p, &g.task.inputs, &g.task.action).unwrap(),
            g.task.output
        );
    }
}

#[test]
fn synthesis_is_deterministic() {
    let task = linear_split_task(6);
    let a = synthesize(&task).unwrap();
    let b = synthesize(&task).unwrap();
    assert_eq!(
        a.program().map(|p| p.to_string()),
        b.program().map(|p| p.to_string())
    );
}
