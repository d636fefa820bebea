//! Python bindings: models, exact rationals, reachability, contraction and
//! counter-machine gadgets. Rational quantities cross the boundary as
//! `Rational` objects or `"p/q"` strings.

use pyo3::basic::CompareOp;
use pyo3::exceptions::{PyValueError, PyZeroDivisionError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rha_core::cm::{cm_run, parse_cm, CounterMachine};
use rha_core::contraction::contract_run;
use rha_core::gadgets::{compile_cm as compile, run_bundle, Encoding};
use rha_core::model::validate_model;
use rha_core::parser::{parse_model, serialize_model};
use rha_core::region::build_region_rsm;
use rha_core::semantics::{initial_configuration, simulate_from, validate_run, Configuration, EarliestOracle};
use rha_core::tbreach::{decide_tb_reach, TbQuery};
use rha_core::trace::{read_trace, write_trace};

pyo3::create_exception!(rha, RhaError, pyo3::exceptions::PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    RhaError::new_err(e.to_string())
}

fn parse_rational(s: &str) -> PyResult<rha_core::Rational> {
    s.parse().map_err(|e| PyValueError::new_err(format!("{e}")))
}

/// Exact rational number.
#[pyclass(frozen, skip_from_py_object, module = "rha")]
#[derive(Clone)]
struct Rational(rha_core::Rational);

#[pymethods]
impl Rational {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        parse_rational(text).map(Rational)
    }

    #[getter]
    fn numerator(&self) -> String {
        self.0.numer().to_string()
    }

    #[getter]
    fn denominator(&self) -> String {
        self.0.denom().to_string()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Rational('{}')", self.0)
    }

    fn __float__(&self) -> f64 {
        self.0.to_f64()
    }

    fn __add__(&self, o: &Rational) -> Rational {
        Rational(&self.0 + &o.0)
    }

    fn __sub__(&self, o: &Rational) -> Rational {
        Rational(&self.0 - &o.0)
    }

    fn __mul__(&self, o: &Rational) -> Rational {
        Rational(&self.0 * &o.0)
    }

    fn __truediv__(&self, o: &Rational) -> PyResult<Rational> {
        if o.0.is_zero() {
            return Err(PyZeroDivisionError::new_err("division by zero"));
        }
        Ok(Rational(&self.0 / &o.0))
    }

    fn __richcmp__(&self, o: &Rational, op: CompareOp) -> bool {
        op.matches(self.0.cmp(&o.0))
    }
}

/// A parsed recursive hybrid automaton.
#[pyclass(module = "rha")]
struct Model {
    inner: rha_core::RhaModel,
}

impl Model {
    fn location(&self, name: &str) -> PyResult<rha_core::Location> {
        self.inner
            .resolve_location(name)
            .ok_or_else(|| err(format!("unknown location `{name}`")))
    }
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        parse_model(text).map(|inner| Model { inner }).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| err(format!("{path}: {e}")))?;
        Self::parse(&text)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn variables(&self) -> Vec<String> {
        self.inner.vars.clone()
    }

    #[getter]
    fn components(&self) -> Vec<String> {
        self.inner.components.iter().map(|c| c.name.clone()).collect()
    }

    fn serialize(&self) -> String {
        serialize_model(&self.inner)
    }

    /// Diagnostics (empty when valid) and the structural class.
    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let v = validate_model(&self.inner);
        let d = PyDict::new(py);
        d.set_item("valid", v.is_ok())?;
        d.set_item("diagnostics", v.diagnostics.clone())?;
        d.set_item("cmax", v.cmax)?;
        d.set_item("rmax", v.rmax)?;
        d.set_item("clocks_only", v.class.clocks_only)?;
        d.set_item("stopwatches_only", v.class.stopwatches_only)?;
        d.set_item("glitch_free", v.class.glitch_free)?;
        d.set_item("by_reference_only", v.class.by_reference_only)?;
        Ok(d)
    }

    /// Runs the earliest-delay oracle; returns the trace as JSON text.
    #[pyo3(signature = (max_steps=1000, target=None))]
    fn simulate<'py>(&self, py: Python<'py>, max_steps: usize, target: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
        let target = target.map(|t| self.location(t)).transpose()?;
        let m = &self.inner;
        let out = simulate_from(m, initial_configuration(m), &EarliestOracle, max_steps, &|c: &Configuration| {
            Some(c.loc) == target
        })
        .map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("reason", out.reason.to_string())?;
        d.set_item("steps", out.run.len())?;
        d.set_item("duration", Rational(out.run.duration()))?;
        d.set_item("trace", write_trace(m, &out.run))?;
        Ok(d)
    }

    /// Replays a JSON trace; raises on the first invalid step.
    fn check_run(&self, trace: &str) -> PyResult<Rational> {
        let run = read_trace(&self.inner, trace).map_err(err)?;
        validate_run(&self.inner, &run).map_err(|v| err(format!("step {}: {}", v.index, v.reason)))?;
        Ok(Rational(run.duration()))
    }

    /// Region-RSM reachability; returns (reachable, witness location names).
    #[pyo3(signature = (target, termination=false))]
    fn reach(&self, target: &str, termination: bool) -> PyResult<(bool, Vec<String>)> {
        let loc = self.location(target)?;
        let rsm = build_region_rsm(&self.inner).map_err(err)?;
        let res = rsm.reach(&self.inner, loc, termination);
        let witness = res.witness.iter().flatten().map(|c| rsm.rsm.loc_name(c.at)).collect();
        Ok((res.reachable, witness))
    }

    /// Time-bounded reachability under a context bound.
    #[pyo3(signature = (target, bound, context, max_len, jobs=1))]
    fn tb_reach<'py>(
        &self,
        py: Python<'py>,
        target: &str,
        bound: &str,
        context: usize,
        max_len: usize,
        jobs: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let q = TbQuery {
            target: self.location(target)?,
            bound: parse_rational(bound)?,
            context,
            max_len,
            jobs,
        };
        let m = &self.inner;
        let res = py.detach(|| decide_tb_reach(m, &initial_configuration(m), &q)).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("reachable", res.reachable)?;
        d.set_item("complete", res.complete)?;
        d.set_item("bound_c", res.bound_c.to_string())?;
        d.set_item("skeletons_checked", res.skeletons_checked)?;
        match &res.witness {
            Some(w) => {
                d.set_item("witness", write_trace(m, w))?;
                d.set_item("duration", Rational(w.duration()))?;
            }
            None => {
                d.set_item("witness", py.None())?;
                d.set_item("duration", py.None())?;
            }
        }
        Ok(d)
    }

    /// Contracts a JSON trace and certifies the result.
    #[pyo3(signature = (trace, bound=None, context=1))]
    fn contract<'py>(
        &self,
        py: Python<'py>,
        trace: &str,
        bound: Option<&str>,
        context: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let m = &self.inner;
        let run = read_trace(m, trace).map_err(err)?;
        let bound = match bound {
            Some(b) => parse_rational(b)?,
            None => run.duration(),
        };
        let out = contract_run(m, &run, &bound, context).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("original_length", run.len())?;
        d.set_item("contracted_length", out.skeleton.len())?;
        d.set_item("bound_c", out.bound_c.to_string())?;
        d.set_item("certified", out.certified.as_ref().map(|c| write_trace(m, c)))?;
        Ok(d)
    }
}

fn machine(program: &str) -> PyResult<CounterMachine> {
    parse_cm(program).map_err(err)
}

fn encoding(name: &str) -> PyResult<Encoding> {
    name.parse().map_err(|e| PyValueError::new_err(format!("{e}")))
}

/// Interprets a two-counter machine; returns (halted, [(pc, c, d), ...]).
#[pyfunction]
#[pyo3(signature = (program, max_steps=200))]
fn interpret_cm(program: &str, max_steps: usize) -> PyResult<(bool, Vec<(usize, u64, u64)>)> {
    let run = cm_run(&machine(program)?, max_steps).map_err(err)?;
    Ok((run.halted, run.trace.iter().map(|c| (c.pc, c.c, c.d)).collect()))
}

/// Compiles a two-counter machine to a model under the named encoding.
#[pyfunction]
fn compile_cm(program: &str, encoding_name: &str) -> PyResult<Model> {
    let b = compile(&machine(program)?, encoding(encoding_name)?);
    Ok(Model { inner: b.model })
}

/// Simulates the compiled machine under its gadget oracle.
#[pyfunction]
#[pyo3(signature = (program, encoding_name, max_steps=200))]
fn run_cm<'py>(
    py: Python<'py>,
    program: &str,
    encoding_name: &str,
    max_steps: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cm = machine(program)?;
    let reference = cm_run(&cm, max_steps).map_err(err)?;
    let bundle = compile(&cm, encoding(encoding_name)?);
    let g = run_bundle(&bundle, max_steps).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("halted", g.halted)?;
    d.set_item("agrees", g.agrees_with(&reference))?;
    d.set_item("duration", Rational(g.duration.clone()))?;
    d.set_item("counters", g.decoded.iter().map(|x| (x.pc, x.c, x.d)).collect::<Vec<_>>())?;
    d.set_item(
        "instr_durations",
        g.instr_durations.iter().cloned().map(Rational).collect::<Vec<_>>(),
    )?;
    Ok(d)
}

#[pymodule]
fn rha(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Rational>()?;
    m.add_class::<Model>()?;
    m.add("RhaError", m.py().get_type::<RhaError>())?;
    m.add_function(wrap_pyfunction!(interpret_cm, m)?)?;
    m.add_function(wrap_pyfunction!(compile_cm, m)?)?;
    m.add_function(wrap_pyfunction!(run_cm, m)?)?;
    Ok(())
}
