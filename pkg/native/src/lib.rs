//! Byte-level BLS12-381 group operations over blst.
//!
//! Every point crosses the boundary in canonical compressed form
//! (48 bytes for G1, 96 bytes for G2). Scalars are 32-byte big-endian.
//! Decoding always checks curve membership and the prime-order subgroup.

use blst::*;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn bad(msg: &str) -> PyErr {
    PyValueError::new_err(msg.to_string())
}

fn scalar(k: &[u8]) -> PyResult<blst_scalar> {
    if k.len() != 32 {
        return Err(bad("scalar must be 32 bytes"));
    }
    let mut s = blst_scalar::default();
    unsafe { blst_scalar_from_bendian(&mut s, k.as_ptr()) };
    Ok(s)
}

fn p1_affine(b: &[u8]) -> PyResult<blst_p1_affine> {
    if b.len() != 48 {
        return Err(bad("G1 encoding must be 48 bytes"));
    }
    let mut a = blst_p1_affine::default();
    let rc = unsafe { blst_p1_uncompress(&mut a, b.as_ptr()) };
    if rc != BLST_ERROR::BLST_SUCCESS {
        return Err(bad("invalid G1 encoding"));
    }
    if !unsafe { blst_p1_affine_in_g1(&a) } {
        return Err(bad("G1 point outside prime-order subgroup"));
    }
    Ok(a)
}

fn p2_affine(b: &[u8]) -> PyResult<blst_p2_affine> {
    if b.len() != 96 {
        return Err(bad("G2 encoding must be 96 bytes"));
    }
    let mut a = blst_p2_affine::default();
    let rc = unsafe { blst_p2_uncompress(&mut a, b.as_ptr()) };
    if rc != BLST_ERROR::BLST_SUCCESS {
        return Err(bad("invalid G2 encoding"));
    }
    if !unsafe { blst_p2_affine_in_g2(&a) } {
        return Err(bad("G2 point outside prime-order subgroup"));
    }
    Ok(a)
}

fn p1(b: &[u8]) -> PyResult<blst_p1> {
    let a = p1_affine(b)?;
    let mut p = blst_p1::default();
    unsafe { blst_p1_from_affine(&mut p, &a) };
    Ok(p)
}

fn p2(b: &[u8]) -> PyResult<blst_p2> {
    let a = p2_affine(b)?;
    let mut p = blst_p2::default();
    unsafe { blst_p2_from_affine(&mut p, &a) };
    Ok(p)
}

fn out1<'py>(py: Python<'py>, p: &blst_p1) -> Bound<'py, PyBytes> {
    let mut buf = [0u8; 48];
    unsafe { blst_p1_compress(buf.as_mut_ptr(), p) };
    PyBytes::new(py, &buf)
}

fn out2<'py>(py: Python<'py>, p: &blst_p2) -> Bound<'py, PyBytes> {
    let mut buf = [0u8; 96];
    unsafe { blst_p2_compress(buf.as_mut_ptr(), p) };
    PyBytes::new(py, &buf)
}

#[pyfunction]
fn g1_generator(py: Python<'_>) -> Bound<'_, PyBytes> {
    out1(py, unsafe { &*blst_p1_generator() })
}

#[pyfunction]
fn g2_generator(py: Python<'_>) -> Bound<'_, PyBytes> {
    out2(py, unsafe { &*blst_p2_generator() })
}

/// Hash-to-curve into G1 (expand_message_xmd with SHA-256, SSWU, random oracle).
#[pyfunction]
fn g1_hash<'py>(py: Python<'py>, msg: &[u8], dst: &[u8]) -> Bound<'py, PyBytes> {
    let mut p = blst_p1::default();
    unsafe {
        blst_hash_to_g1(
            &mut p,
            msg.as_ptr(),
            msg.len(),
            dst.as_ptr(),
            dst.len(),
            std::ptr::null(),
            0,
        )
    };
    out1(py, &p)
}

#[pyfunction]
fn g1_mul<'py>(py: Python<'py>, point: &[u8], k: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
    let p = p1(point)?;
    let s = scalar(k)?;
    let mut r = blst_p1::default();
    unsafe { blst_p1_mult(&mut r, &p, s.b.as_ptr(), 255) };
    Ok(out1(py, &r))
}

#[pyfunction]
fn g2_mul<'py>(py: Python<'py>, point: &[u8], k: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
    let p = p2(point)?;
    let s = scalar(k)?;
    let mut r = blst_p2::default();
    unsafe { blst_p2_mult(&mut r, &p, s.b.as_ptr(), 255) };
    Ok(out2(py, &r))
}

#[pyfunction]
fn g1_add<'py>(py: Python<'py>, a: &[u8], b: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
    let (pa, pb) = (p1(a)?, p1(b)?);
    let mut r = blst_p1::default();
    unsafe { blst_p1_add_or_double(&mut r, &pa, &pb) };
    Ok(out1(py, &r))
}

#[pyfunction]
fn g2_add<'py>(py: Python<'py>, a: &[u8], b: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
    let (pa, pb) = (p2(a)?, p2(b)?);
    let mut r = blst_p2::default();
    unsafe { blst_p2_add_or_double(&mut r, &pa, &pb) };
    Ok(out2(py, &r))
}

#[pyfunction]
fn g1_neg<'py>(py: Python<'py>, a: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
    let mut p = p1(a)?;
    unsafe { blst_p1_cneg(&mut p, true) };
    Ok(out1(py, &p))
}

/// Raises ValueError unless `b` is a canonical encoding of a subgroup point.
#[pyfunction]
fn g1_check(b: &[u8]) -> PyResult<()> {
    p1_affine(b).map(|_| ())
}

#[pyfunction]
fn g2_check(b: &[u8]) -> PyResult<()> {
    p2_affine(b).map(|_| ())
}

/// True iff the product of e(P_i, Q_i) over all pairs is the identity in GT.
#[pyfunction]
fn pairing_product_is_one(pairs: Vec<(Vec<u8>, Vec<u8>)>) -> PyResult<bool> {
    let mut acc: Option<blst_fp12> = None;
    for (a, b) in pairs.iter() {
        let pa = p1_affine(a)?;
        let qb = p2_affine(b)?;
        // e(O, Q) = e(P, O) = 1
        if unsafe { blst_p1_affine_is_inf(&pa) || blst_p2_affine_is_inf(&qb) } {
            continue;
        }
        let mut ml = blst_fp12::default();
        unsafe { blst_miller_loop(&mut ml, &qb, &pa) };
        acc = Some(match acc {
            None => ml,
            Some(prev) => {
                let mut m = blst_fp12::default();
                unsafe { blst_fp12_mul(&mut m, &prev, &ml) };
                m
            }
        });
    }
    match acc {
        None => Ok(true),
        Some(f) => {
            let mut r = blst_fp12::default();
            unsafe { blst_final_exp(&mut r, &f) };
            Ok(unsafe { blst_fp12_is_one(&r) })
        }
    }
}

#[pymodule]
fn _bls(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(g1_generator, m)?)?;
    m.add_function(wrap_pyfunction!(g2_generator, m)?)?;
    m.add_function(wrap_pyfunction!(g1_hash, m)?)?;
    m.add_function(wrap_pyfunction!(g1_mul, m)?)?;
    m.add_function(wrap_pyfunction!(g2_mul, m)?)?;
    m.add_function(wrap_pyfunction!(g1_add, m)?)?;
    m.add_function(wrap_pyfunction!(g2_add, m)?)?;
    m.add_function(wrap_pyfunction!(g1_neg, m)?)?;
    m.add_function(wrap_pyfunction!(g1_check, m)?)?;
    m.add_function(wrap_pyfunction!(g2_check, m)?)?;
    m.add_function(wrap_pyfunction!(pairing_product_is_one, m)?)?;
    Ok(())
}
