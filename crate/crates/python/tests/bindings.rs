use pyo3::prelude::*;
use pyo3::types::PyDict;
use pywavegate::pywavegate;

#[test]
fn module_round_trip_through_interpreter() {
    pyo3::append_to_inittab!(pywavegate);
    Python::initialize();
    Python::attach(|py| {
        let locals = PyDict::new(py);
        py.run(
            cr#"
import pywavegate as wg
x = wg.synth_pulse(seed=1, duration_s=2.048)
c = wg.wavedec(x, "db6", 4, "periodic")
assert max(abs(a - b) for a, b in zip(wg.waverec(c), x)) < 1e-10
cols = wg.subsignal_matrix(x, "db6", 4)
assert len(cols) == 5
y = wg.corrupt(x, "gaussian:var=0.05", seed=2)
bits, b = wg.binary_oracle(y, x, "db6", 4)
a, r = wg.relaxed_oracle(y, x, "db6", 4)
ok = r <= b + 1e-9
try:
    wg.corrupt(x, "gaussian:var=-1")
    bad_noise = False
except ValueError:
    bad_noise = True
"#,
            None,
            Some(&locals),
        )
        .unwrap();
        assert!(locals.get_item("ok").unwrap().unwrap().extract::<bool>().unwrap());
        assert!(locals.get_item("bad_noise").unwrap().unwrap().extract::<bool>().unwrap());
    });
}
