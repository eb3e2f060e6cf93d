//! Synthetic degradation: motion-blur kernels from random trajectories,
//! the blur/noise/gamma/knockout corruption chain, and random square
//! dropout masks. Everything here is deterministic given its seed, so
//! paired clean/corrupt datasets can be regenerated byte-identically.

use crate::geometry::raster::{conv2, gaussian_taps};
use crate::geometry::Mask;
use crate::{Error, Frame, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Square blur kernel with odd side; taps are nonnegative and normalized
/// to sum 1 on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Psf {
    side: usize,
    taps: Vec<f64>,
}

impl Psf {
    pub fn new(side: usize, taps: Vec<f64>) -> Result<Self> {
        if side == 0 || side.is_multiple_of(2) {
            return Err(Error::invalid(format!("psf side {side} must be odd")));
        }
        if taps.len() != side * side {
            return Err(Error::ShapeMismatch(format!(
                "{} taps for side {side}",
                taps.len()
            )));
        }
        if taps.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::invalid("psf taps must be finite and nonnegative"));
        }
        let sum: f64 = taps.iter().sum();
        if sum <= 0.0 {
            return Err(Error::invalid("psf taps sum to zero"));
        }
        let taps = taps.into_iter().map(|t| t / sum).collect();
        Ok(Psf { side, taps })
    }

    /// Identity kernel: all mass on the center tap.
    pub fn delta(side: usize) -> Result<Self> {
        let mut taps = vec![0.0; side * side];
        if side % 2 == 1 && side > 0 {
            taps[(side / 2) * side + side / 2] = 1.0;
        }
        Psf::new(side, taps)
    }

    /// Isotropic Gaussian kernel truncated at three sigma.
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("gaussian psf sigma {sigma}")));
        }
        let line = gaussian_taps(sigma);
        let side = line.len();
        let mut taps = Vec::with_capacity(side * side);
        for y in &line {
            for x in &line {
                taps.push(y * x);
            }
        }
        Psf::new(side, taps)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// True convolution of every channel with this kernel, reflected
    /// borders. Output stays in `[0,1]` because taps are a convex
    /// combination.
    pub fn apply(&self, frame: &Frame) -> Frame {
        let planes: Vec<Vec<f64>> = (0..frame.channels())
            .map(|c| {
                conv2(
                    &frame.plane(c),
                    frame.width(),
                    frame.height(),
                    &self.taps,
                    self.side,
                )
            })
            .collect();
        Frame::from_planes(frame, &planes).expect("convolution preserves shape")
    }
}

/// Continuous 2D motion path in kernel-relative coordinates: (0,0) is the
/// kernel center, one unit is one tap.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurTrajectory {
    pub points: Vec<(f64, f64)>,
    pub seed: u64,
}

impl BlurTrajectory {
    /// Random walk with inertia: the heading drifts by Gaussian turns, so
    /// paths curve smoothly instead of jittering. The path is recentered
    /// on its centroid and scaled to fit inside the kernel support with
    /// margin. Steps land well under a tap apart, which keeps the splat
    /// in [`trajectory_kernel`] dense along the path.
    pub fn generate(seed: u64, side: usize) -> Result<Self> {
        if side < 3 || side.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "trajectory kernel side {side} must be odd and at least 3"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps = 96;
        let turn = Normal::new(0.0, 0.25).expect("valid turn sigma");
        let mut heading: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let mut pos = (0.0f64, 0.0f64);
        let mut points = Vec::with_capacity(steps + 1);
        points.push(pos);
        for _ in 0..steps {
            heading += turn.sample(&mut rng);
            pos.0 += heading.cos();
            pos.1 += heading.sin();
            points.push(pos);
        }
        let n = points.len() as f64;
        let cx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let cy = points.iter().map(|p| p.1).sum::<f64>() / n;
        for p in &mut points {
            p.0 -= cx;
            p.1 -= cy;
        }
        let extent = points
            .iter()
            .map(|p| p.0.abs().max(p.1.abs()))
            .fold(0.0, f64::max)
            .max(1e-9);
        let half = (side - 1) as f64 / 2.0;
        let fill = rng.gen_range(0.55..0.95);
        let scale = half * fill / extent;
        for p in &mut points {
            p.0 *= scale;
            p.1 *= scale;
        }
        Ok(BlurTrajectory { points, seed })
    }
}

/// Rasterizes a trajectory into a kernel: every point carries equal mass
/// and is splatted bilinearly onto the tap grid. Generators emit points
/// at uniform arc spacing, so equal point mass realizes uniform mass per
/// unit of path length.
pub fn trajectory_kernel(trajectory: &BlurTrajectory, side: usize) -> Result<Psf> {
    if side == 0 || side.is_multiple_of(2) {
        return Err(Error::invalid(format!("kernel side {side} must be odd")));
    }
    if trajectory.points.is_empty() {
        return Err(Error::invalid("trajectory has no points"));
    }
    let half = (side - 1) as f64 / 2.0;
    let mut taps = vec![0.0; side * side];
    let mass = 1.0 / trajectory.points.len() as f64;
    for (px, py) in &trajectory.points {
        if !(px.is_finite() && py.is_finite()) || px.abs() > half + 1e-9 || py.abs() > half + 1e-9
        {
            return Err(Error::invalid(format!(
                "trajectory point ({px}, {py}) exceeds kernel support {side}"
            )));
        }
        let u = (px + half).clamp(0.0, (side - 1) as f64);
        let v = (py + half).clamp(0.0, (side - 1) as f64);
        let i0 = u.floor() as usize;
        let j0 = v.floor() as usize;
        let fu = u - i0 as f64;
        let fv = v - j0 as f64;
        let mut splat = |i: usize, j: usize, w: f64| {
            if w > 0.0 && i < side && j < side {
                taps[j * side + i] += mass * w;
            }
        };
        splat(i0, j0, (1.0 - fu) * (1.0 - fv));
        splat(i0 + 1, j0, fu * (1.0 - fv));
        splat(i0, j0 + 1, (1.0 - fu) * fv);
        splat(i0 + 1, j0 + 1, fu * fv);
    }
    Psf::new(side, taps)
}

/// How many dropout squares to stamp and which side lengths they may take.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSpec {
    pub count: usize,
    pub sides: Vec<usize>,
}

/// Union of `count` axis-aligned squares placed uniformly at random, each
/// side drawn uniformly from `sides`, always fully inside the frame.
/// Same arguments and seed give the identical mask.
pub fn random_masks(
    width: usize,
    height: usize,
    count: usize,
    sides: &[usize],
    seed: u64,
) -> Result<Mask> {
    let mut mask = Mask::new_false(width, height)?;
    for (x0, y0, side) in random_mask_squares(width, height, count, sides, seed)? {
        for y in y0..y0 + side {
            for x in x0..x0 + side {
                mask.set(x, y, true);
            }
        }
    }
    Ok(mask)
}

/// The square placements behind [`random_masks`], as `(x0, y0, side)` in
/// pixels. Exposed so dataset builders can derive matching boxes.
pub fn random_mask_squares(
    width: usize,
    height: usize,
    count: usize,
    sides: &[usize],
    seed: u64,
) -> Result<Vec<(usize, usize, usize)>> {
    if count == 0 {
        return Err(Error::invalid("mask count must be at least 1"));
    }
    if sides.is_empty() {
        return Err(Error::invalid("mask side set is empty"));
    }
    if let Some(bad) = sides.iter().find(|s| **s == 0 || **s > width || **s > height) {
        return Err(Error::invalid(format!(
            "mask side {bad} does not fit a {width}x{height} frame"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut squares = Vec::with_capacity(count);
    for _ in 0..count {
        let side = sides[rng.gen_range(0..sides.len())];
        let x0 = rng.gen_range(0..=width - side);
        let y0 = rng.gen_range(0..=height - side);
        squares.push((x0, y0, side));
    }
    Ok(squares)
}

/// Full degradation recipe. Stages apply in the listed order; `None`
/// skips a stage.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationSpec {
    pub psf: Option<Psf>,
    /// Additive Gaussian noise standard deviation, on the [0,1] scale.
    pub noise_sigma: f64,
    /// Power-law exponent applied per channel. 1.0 is neutral.
    pub gamma: f64,
    pub mask: Option<MaskSpec>,
}

impl DegradationSpec {
    pub fn neutral() -> Self {
        DegradationSpec {
            psf: None,
            noise_sigma: 0.0,
            gamma: 1.0,
            mask: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::invalid(format!(
                "noise sigma {} must be nonnegative",
                self.noise_sigma
            )));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::invalid(format!(
                "gamma {} must be positive",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// What [`corrupt`] produced, with the ingredients callers need to build
/// ground truth: the kernel actually applied and the knockout mask.
#[derive(Debug, Clone)]
pub struct Corrupted {
    pub frame: Frame,
    pub psf: Option<Psf>,
    pub mask: Option<Mask>,
}

/// Runs the degradation chain: blur, additive Gaussian noise, clamp to
/// the sensor range, per-channel gamma, then mask knockout (masked pixels
/// saturate to 1.0). The clamp sits before gamma so noisy values stay in
/// the exponent's domain.
///
/// Noise is drawn plane by plane (channel 0 first, row-major within a
/// plane); the knockout mask uses a seed derived from `seed`, so the
/// whole chain is reproducible from the one value.
pub fn corrupt(frame: &Frame, spec: &DegradationSpec, seed: u64) -> Result<Corrupted> {
    spec.validate()?;
    let (w, h) = (frame.width(), frame.height());
    let mut planes: Vec<Vec<f64>> = (0..frame.channels()).map(|c| frame.plane(c)).collect();
    if let Some(psf) = &spec.psf {
        for p in planes.iter_mut() {
            *p = conv2(p, w, h, psf.taps(), psf.side());
        }
    }
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x6e6f697365));
        let normal = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
        for p in planes.iter_mut() {
            for v in p.iter_mut() {
                *v += normal.sample(&mut rng);
            }
        }
    }
    for p in planes.iter_mut() {
        for v in p.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
    }
    if spec.gamma != 1.0 {
        for p in planes.iter_mut() {
            for v in p.iter_mut() {
                *v = v.powf(spec.gamma);
            }
        }
    }
    let mask = match &spec.mask {
        Some(ms) => {
            let mask = random_masks(w, h, ms.count, &ms.sides, mix_seed(seed, 0x6d61736b))?;
            for p in planes.iter_mut() {
                for (i, v) in p.iter_mut().enumerate() {
                    if mask.data()[i] {
                        *v = 1.0;
                    }
                }
            }
            Some(mask)
        }
        None => None,
    };
    Ok(Corrupted {
        frame: Frame::from_planes(frame, &planes)?,
        psf: spec.psf.clone(),
        mask,
    })
}

/// SplitMix64 finalizer over `seed ^ salt`; gives independent per-stage
/// seeds from one run seed.
fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt;
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic synthetic scene: smooth illumination, sinusoidal
/// texture, and a handful of hard-edged disks. Gives the solvers and
/// metrics something with both low-frequency structure and real edges.
pub fn test_chart(width: usize, height: usize, seed: u64) -> Result<Frame> {
    if width == 0 || height == 0 {
        return Err(Error::invalid("chart dimensions must be nonzero"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x6368617274));
    let tau = std::f64::consts::TAU;
    let (ax, ay) = (rng.gen_range(0.6..1.4), rng.gen_range(0.6..1.4));
    let phases: [f64; 3] = [
        rng.gen_range(0.0..tau),
        rng.gen_range(0.0..tau),
        rng.gen_range(0.0..tau),
    ];
    let (tx, ty) = (rng.gen_range(9.0..14.0), rng.gen_range(9.0..14.0));
    struct Disk {
        cx: f64,
        cy: f64,
        r: f64,
        delta: [f64; 3],
    }
    let disks: Vec<Disk> = (0..6)
        .map(|_| Disk {
            cx: rng.gen_range(0.1..0.9),
            cy: rng.gen_range(0.1..0.9),
            r: rng.gen_range(0.05..0.16),
            delta: [
                rng.gen_range(-0.28..0.28),
                rng.gen_range(-0.28..0.28),
                rng.gen_range(-0.28..0.28),
            ],
        })
        .collect();
    Frame::from_fn(width, height, 3, |x, y, c| {
        let u = x as f64 / width as f64;
        let v = y as f64 / height as f64;
        let smooth = 0.5 + 0.18 * (tau * (ax * u + ay * v) + phases[c]).sin();
        let texture = 0.06 * (tau * tx * u).sin() * (tau * ty * v).cos();
        let mut val = smooth + texture;
        for d in &disks {
            let dx = u - d.cx;
            let dy = v - d.cy;
            if dx * dx + dy * dy < d.r * d.r {
                val += d.delta[c];
            }
        }
        val.clamp(0.04, 0.96)
    })
}
