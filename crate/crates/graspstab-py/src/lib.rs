use pyo3::prelude::*;

#[pymodule]
fn graspstab_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
