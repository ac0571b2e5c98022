use morse_actions::actions::ActionSystem;
use morse_actions::io;
use morse_actions::morse::morse_check;
use std::path::PathBuf;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn shipped_potentials_load_and_are_morse() {
    for (name, wells) in [("pendulum.json", 1), ("two_well.json", 2)] {
        let pot = io::load_potential(&data(name)).unwrap();
        let md = morse_check(&pot.at(&pot.center()).unwrap(), pot.s0()).unwrap();
        assert_eq!(md.critical_set().n_wells(), wells, "{name}");
    }
    io::load_perturbed(&data("eps_linear.json")).unwrap();
}

#[test]
fn pendulum_family_is_the_unit_pendulum_at_the_centre() {
    let pot = io::load_potential(&data("pendulum.json")).unwrap();
    assert_eq!(pot.at(&pot.center()).unwrap(), morse_actions::trig::TrigSeries::cosine(1.0));
}

#[test]
fn potential_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let pot = io::load_potential(&data("two_well.json")).unwrap();
    let path = dir.path().join("copy.json");
    io::write_potential(&pot, &path).unwrap();
    assert_eq!(io::load_potential(&path).unwrap(), pot);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), io::potential_json(&pot));
}

#[test]
fn action_table_round_trips_through_csv() {
    let pot = io::load_potential(&data("pendulum.json")).unwrap();
    let sys = ActionSystem::pure(morse_check(&pot.at(&pot.center()).unwrap(), 1.0).unwrap());
    let br = sys.branch(1).unwrap();
    let rows: Vec<Vec<f64>> = io::parse_range("-0.9:0.9:9")
        .unwrap()
        .into_iter()
        .map(|e| vec![e, br.action(e).unwrap()])
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    io::write_csv(std::fs::File::create(&path).unwrap(), &["E", "I"], &rows).unwrap();
    let (_, back) = io::read_csv(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, rows);
}

#[test]
fn missing_file_is_an_io_error() {
    let err = io::load_potential(&data("absent.json")).unwrap_err();
    assert!(err.to_string().contains("absent.json"));
}
