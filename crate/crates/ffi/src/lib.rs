//! C ABI over the graspwrench library.
//!
//! Objects cross the boundary as opaque handles created by `gw_*_new` /
//! `gw_*_load` / `gw_estimate` and released with the matching `gw_*_free`.
//! Every fallible call returns a [`GwStatus`]; on failure the message is
//! available from [`gw_last_error`] on the same thread. Vectors are passed
//! as flat `double` arrays: 3 per point, 6 per wrench. Angles are degrees.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use graspwrench::mesh::TriMesh;
use graspwrench::metrics::{epsilon_from_samples, epsilon_t_from_samples};
use graspwrench::oracle::{boundary_ray, force_closure_margin, generators};
use graspwrench::synthesis::optimize::SynthesisResult;
use graspwrench::synthesis::{bundled_task, run_task};
use graspwrench::task::{task_energy, TaskWrenchSpace};
use graspwrench::wrench::{estimate_boundary, BoundarySampleSet, Contact, EstimatorConfig, FrictionModel};
use graspwrench::{GwsError, Vec3, Vec6};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GwStatus {
    Ok = 0,
    NullPointer = 1,
    Invalid = 2,
    Numerical = 3,
    NotForceClosure = 4,
    Io = 5,
    /// A Rust panic was caught at the boundary.
    Internal = 6,
}

/// Contacts on an object, in the object frame.
pub struct GwContactSet {
    contacts: Vec<Contact>,
}

/// Sampled grasp wrench boundary.
pub struct GwBoundary {
    set: BoundarySampleSet,
}

pub struct GwMesh {
    mesh: TriMesh,
}

pub struct GwSynthResult {
    result: SynthesisResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &GwsError) -> GwStatus {
    match e {
        GwsError::Invalid(_) | GwsError::Parse { .. } => GwStatus::Invalid,
        GwsError::Io { .. } => GwStatus::Io,
        GwsError::Numerical(_) => GwStatus::Numerical,
        GwsError::NotForceClosure(_) => GwStatus::NotForceClosure,
    }
}

/// Runs `f`, turning errors and panics into status codes.
fn guard<F>(f: F) -> GwStatus
where
    F: FnOnce() -> Result<(), GwStatus>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GwStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            GwStatus::Internal
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, GwStatus>;
}

impl<T> OrStatus<T> for graspwrench::Result<T> {
    fn or_status(self) -> Result<T, GwStatus> {
        self.map_err(|e| {
            set_error(e.to_string());
            status_of(&e)
        })
    }
}

fn null(what: &str) -> GwStatus {
    set_error(format!("{what} is null"));
    GwStatus::NullPointer
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], GwStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, GwStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, GwStatus> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn wrench(p: *const f64, what: &str) -> Result<Vec6, GwStatus> {
    Ok(Vec6::from_column_slice(slice(p, 6, what)?))
}

unsafe fn tws(w_t: *const f64, gamma_deg: f64) -> Result<TaskWrenchSpace, GwStatus> {
    TaskWrenchSpace::new(wrench(w_t, "w_t")?, gamma_deg.to_radians()).or_status()
}

unsafe fn contacts_from(
    p: *const f64,
    n: *const f64,
    m: usize,
    friction: graspwrench::Result<FrictionModel>,
) -> Result<Vec<Contact>, GwStatus> {
    let f = friction.or_status()?;
    let ps = slice(p, 3 * m, "positions")?;
    let ns = slice(n, 3 * m, "normals")?;
    (0..m)
        .map(|i| {
            Contact::new(
                Vec3::from_column_slice(&ps[3 * i..3 * i + 3]),
                Vec3::from_column_slice(&ns[3 * i..3 * i + 3]),
                f,
            )
            .or_status()
        })
        .collect()
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length
/// without the terminator, 0 when there is none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn gw_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Point contacts with Coulomb friction `mu`. `p` and `n` hold `m`
/// positions and inward normals (3 doubles each).
///
/// # Safety
/// `p` and `n` must point to `3*m` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_contacts_new_pcf(
    p: *const f64,
    n: *const f64,
    m: usize,
    mu: f64,
    out_set: *mut *mut GwContactSet,
) -> GwStatus {
    guard(|| {
        let o = out(out_set, "out")?;
        let contacts = contacts_from(p, n, m, FrictionModel::pcf(mu))?;
        *o = Box::into_raw(Box::new(GwContactSet { contacts }));
        Ok(())
    })
}

/// Soft-finger contacts with tangential friction `mu1` and torsional
/// friction `mu2`.
///
/// # Safety
/// As [`gw_contacts_new_pcf`].
#[no_mangle]
pub unsafe extern "C" fn gw_contacts_new_sfc(
    p: *const f64,
    n: *const f64,
    m: usize,
    mu1: f64,
    mu2: f64,
    out_set: *mut *mut GwContactSet,
) -> GwStatus {
    guard(|| {
        let o = out(out_set, "out")?;
        let contacts = contacts_from(p, n, m, FrictionModel::sfc(mu1, mu2))?;
        *o = Box::into_raw(Box::new(GwContactSet { contacts }));
        Ok(())
    })
}

/// # Safety
/// `set` must be null or a handle from `gw_contacts_new_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gw_contacts_free(set: *mut GwContactSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// # Safety
/// `set` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gw_contacts_len(set: *const GwContactSet) -> usize {
    set.as_ref().map_or(0, |s| s.contacts.len())
}

/// Samples `k` boundary points of the grasp wrench space of `set`.
///
/// # Safety
/// `set` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_estimate(
    set: *const GwContactSet,
    k: usize,
    delta_deg: f64,
    cpn: bool,
    seed: u64,
    out_boundary: *mut *mut GwBoundary,
) -> GwStatus {
    guard(|| {
        let s = handle(set, "contact set")?;
        let o = out(out_boundary, "out")?;
        let cfg = EstimatorConfig {
            k,
            delta: delta_deg.to_radians(),
            cpn,
            seed,
        };
        let set = estimate_boundary(&s.contacts, &cfg).or_status()?;
        *o = Box::into_raw(Box::new(GwBoundary { set }));
        Ok(())
    })
}

/// # Safety
/// `b` must be null or a handle from [`gw_estimate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gw_boundary_free(b: *mut GwBoundary) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// Number of samples in `b`.
///
/// # Safety
/// `b` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gw_boundary_len(b: *const GwBoundary) -> usize {
    b.as_ref().map_or(0, |b| b.set.len())
}

/// Copies directions and boundary wrenches (6 doubles per sample) into
/// `u` and `w`, either of which may be null. `capacity` is the number of
/// samples the buffers hold and must be at least [`gw_boundary_len`].
///
/// # Safety
/// Non-null `u`/`w` must point to `6*capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gw_boundary_copy(
    b: *const GwBoundary,
    u: *mut f64,
    w: *mut f64,
    capacity: usize,
) -> GwStatus {
    guard(|| {
        let b = handle(b, "boundary")?;
        let n = b.set.len();
        if capacity < n {
            set_error(format!("buffer holds {capacity} samples, {n} needed"));
            return Err(GwStatus::Invalid);
        }
        for (i, s) in b.set.samples.iter().enumerate() {
            if !u.is_null() {
                ptr::copy_nonoverlapping(s.u.as_ptr(), u.add(6 * i), 6);
            }
            if !w.is_null() {
                ptr::copy_nonoverlapping(s.w.as_ptr(), w.add(6 * i), 6);
            }
        }
        Ok(())
    })
}

/// Sample-based ε of the boundary; 0 when it is not force closure.
///
/// # Safety
/// `b` must be a live handle; `eps` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_boundary_epsilon(b: *const GwBoundary, eps: *mut f64) -> GwStatus {
    guard(|| {
        let b = handle(b, "boundary")?;
        let o = out(eps, "eps")?;
        *o = epsilon_from_samples(&b.set.wrenches(), b.set.config.seed).or_status()?;
        Ok(())
    })
}

/// Sample-based ε_t for the sector of half-angle `gamma_deg` about `w_t`.
///
/// # Safety
/// `w_t` must point to 6 doubles; `eps_t` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_boundary_epsilon_t(
    b: *const GwBoundary,
    w_t: *const f64,
    gamma_deg: f64,
    eps_t: *mut f64,
) -> GwStatus {
    guard(|| {
        let b = handle(b, "boundary")?;
        let t = tws(w_t, gamma_deg)?;
        let o = out(eps_t, "eps_t")?;
        *o = epsilon_t_from_samples(&b.set.samples, &t).or_status()?;
        Ok(())
    })
}

/// Cosine task energy of the boundary against the sector.
///
/// # Safety
/// As [`gw_boundary_epsilon_t`].
#[no_mangle]
pub unsafe extern "C" fn gw_task_energy(
    b: *const GwBoundary,
    w_t: *const f64,
    gamma_deg: f64,
    energy: *mut f64,
) -> GwStatus {
    guard(|| {
        let b = handle(b, "boundary")?;
        let t = tws(w_t, gamma_deg)?;
        let o = out(energy, "energy")?;
        *o = task_energy(&b.set, &t).value;
        Ok(())
    })
}

/// Mean LP ray scale of the boundary samples against the `d`-edge oracle
/// built from the same normalized contacts, over at most `max_points`
/// samples taken at an even stride (0 = all).
///
/// # Safety
/// `b` must be a live handle; `mean_q` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_boundary_oracle_mean_q(
    b: *const GwBoundary,
    d: usize,
    max_points: usize,
    mean_q: *mut f64,
) -> GwStatus {
    guard(|| {
        let b = handle(b, "boundary")?;
        let o = out(mean_q, "mean_q")?;
        let gens = generators(&b.set.contacts, d).or_status()?;
        let pts: Vec<Vec6> = b.set.wrenches().into_iter().filter(|w| w.norm() > 0.0).collect();
        if pts.is_empty() {
            set_error("boundary has no non-zero sample".into());
            return Err(GwStatus::Numerical);
        }
        let limit = if max_points == 0 { pts.len() } else { max_points };
        let stride = pts.len().div_ceil(limit).max(1);
        let mut sum = 0.0;
        let mut n = 0usize;
        for w in pts.iter().step_by(stride) {
            sum += graspwrench::oracle::boundary_ray_gens(w, &gens).or_status()?.q;
            n += 1;
        }
        *o = sum / n as f64;
        Ok(())
    })
}

/// Largest `q` with `q·w` inside the `d`-edge discretized grasp wrench
/// space of `set` (contacts used as given, without normalization).
///
/// # Safety
/// `w` must point to 6 doubles; `q` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_oracle_ray(
    set: *const GwContactSet,
    w: *const f64,
    d: usize,
    q: *mut f64,
) -> GwStatus {
    guard(|| {
        let s = handle(set, "contact set")?;
        let w = wrench(w, "w")?;
        let o = out(q, "q")?;
        *o = boundary_ray(&w, &s.contacts, d).or_status()?.q;
        Ok(())
    })
}

/// Smallest LP ray scale over the 12 signed coordinate wrenches; positive
/// exactly when the `d`-edge discretization is force closure.
///
/// # Safety
/// `set` must be a live handle; `margin` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_force_closure_margin(
    set: *const GwContactSet,
    d: usize,
    margin: *mut f64,
) -> GwStatus {
    guard(|| {
        let s = handle(set, "contact set")?;
        let o = out(margin, "margin")?;
        *o = force_closure_margin(&generators(&s.contacts, d).or_status()?).or_status()?;
        Ok(())
    })
}

/// Loads a triangle mesh from an OBJ file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_mesh_load_obj(path: *const c_char, out_mesh: *mut *mut GwMesh) -> GwStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let o = out(out_mesh, "out")?;
        let path = CStr::from_ptr(path).to_str().map_err(|_| {
            set_error("path is not valid UTF-8".into());
            GwStatus::Invalid
        })?;
        let mesh = TriMesh::load_obj(path).or_status()?;
        *o = Box::into_raw(Box::new(GwMesh { mesh }));
        Ok(())
    })
}

/// Mesh from `nv` vertices (3 doubles each) and `nt` triangles (3
/// zero-based indices each).
///
/// # Safety
/// `vertices` must hold `3*nv` doubles and `triangles` `3*nt` indices.
#[no_mangle]
pub unsafe extern "C" fn gw_mesh_new(
    vertices: *const f64,
    nv: usize,
    triangles: *const u32,
    nt: usize,
    out_mesh: *mut *mut GwMesh,
) -> GwStatus {
    guard(|| {
        let o = out(out_mesh, "out")?;
        let v = slice(vertices, 3 * nv, "vertices")?;
        let t = slice(triangles, 3 * nt, "triangles")?;
        let verts = v.chunks_exact(3).map(Vec3::from_column_slice).collect();
        let tris = t.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let mesh = TriMesh::new(verts, tris).or_status()?;
        *o = Box::into_raw(Box::new(GwMesh { mesh }));
        Ok(())
    })
}

/// # Safety
/// `mesh` must be null or a live mesh handle.
#[no_mangle]
pub unsafe extern "C" fn gw_mesh_free(mesh: *mut GwMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Distance from `x` to the surface, negative inside a watertight mesh.
///
/// # Safety
/// `x` must point to 3 doubles; `distance` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_mesh_signed_distance(
    mesh: *const GwMesh,
    x: *const f64,
    distance: *mut f64,
) -> GwStatus {
    guard(|| {
        let m = handle(mesh, "mesh")?;
        let x = Vec3::from_column_slice(slice(x, 3, "x")?);
        let o = out(distance, "distance")?;
        *o = m.mesh.signed_distance(&x);
        Ok(())
    })
}

/// Runs the bundled synthesis task `name` (e.g. "lift-sphere") with its
/// default settings and `seed`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_synth_task(
    name: *const c_char,
    seed: u64,
    out_result: *mut *mut GwSynthResult,
) -> GwStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        let o = out(out_result, "out")?;
        let name = CStr::from_ptr(name).to_string_lossy();
        let task = bundled_task(&name).or_status()?;
        let result = run_task(&task, &task.config(seed)).or_status()?;
        *o = Box::into_raw(Box::new(GwSynthResult { result }));
        Ok(())
    })
}

/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn gw_synth_result_free(r: *mut GwSynthResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Whether the validated configuration covers the task sector without
/// excess penetration; false for a null handle.
///
/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn gw_synth_result_success(r: *const GwSynthResult) -> bool {
    r.as_ref().is_some_and(|r| r.result.verdict.success)
}

/// # Safety
/// `r` must be a live result handle; `eps_t` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_synth_result_eps_t(r: *const GwSynthResult, eps_t: *mut f64) -> GwStatus {
    guard(|| {
        let r = handle(r, "result")?;
        *out(eps_t, "eps_t")? = r.result.eps_t;
        Ok(())
    })
}

/// Full result as a JSON string owned by the caller; release it with
/// [`gw_string_free`].
///
/// # Safety
/// `r` must be a live result handle; `json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_synth_result_json(r: *const GwSynthResult, json: *mut *mut c_char) -> GwStatus {
    guard(|| {
        let r = handle(r, "result")?;
        let o = out(json, "json")?;
        let text = serde_json::to_string(&r.result).map_err(|e| {
            set_error(e.to_string());
            GwStatus::Internal
        })?;
        *o = CString::new(text).unwrap_or_default().into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
