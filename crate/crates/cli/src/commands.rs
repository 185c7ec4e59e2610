use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tomtrack::geometry::nifti::{
    encode_mask, encode_orientation_map, encode_peak_image, read_mask, read_nifti, read_orientation_map,
    read_peak_image,
};
use tomtrack::geometry::{prune_peaks, BinaryMask, GridGeometry, OrientationMap, GEOMETRY_TOLERANCE};
use tomtrack::metrics::evaluate;
use tomtrack::phantom::{generate_phantom, peaks_with_distractors, perturb_peaks, BundleKind, BundleSpec};
use tomtrack::reference_prep::{extract_endpoint_regions, extract_tom, ClusterParams};
use tomtrack::streamlines::tck::encode_tck;
use tomtrack::streamlines::{read_tck, voxelize, Tractogram};
use tomtrack::tracking::{
    filter_streamlines, fuse_prior, select_best_original_peak, track_bundle, TrackerConfig, TrackingContext,
    TrackingMode,
};

use crate::args::{
    Command, EvalArgs, FilterArgs, FlavorArg, KindArg, MakeEndingsArgs, MakeMaskArgs, MakeTomArgs, ModeArg,
    PhantomArgs, ReferenceTck, Regions, ReportFormat, TrackArgs,
};
use crate::error::{CliError, CliResult};
use crate::output::{write_atomic, write_nifti, Manifest};

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Phantom(a) => phantom(a),
        Command::MakeMask(a) => make_mask(a),
        Command::MakeEndings(a) => make_endings(a),
        Command::MakeTom(a) => make_tom(a),
        Command::Track(a) => track(a),
        Command::Filter(a) => filter(a),
        Command::Eval(a) => eval(a),
    }
}

fn core(path: &Path) -> impl FnOnce(tomtrack::Error) -> CliError + '_ {
    move |e| CliError::from_core(e, Some(path))
}

fn core_nopath(e: tomtrack::Error) -> CliError {
    CliError::from_core(e, None)
}

fn load_mask(path: &Path) -> CliResult<BinaryMask> {
    read_mask(path).map_err(core(path))
}

fn reference_geometry(path: &Path) -> CliResult<GridGeometry> {
    Ok(read_nifti(path).map_err(core(path))?.geometry)
}

fn load_tck(input: &ReferenceTck) -> CliResult<Tractogram> {
    let geom = reference_geometry(&input.reference)?;
    read_tck(&input.tck, geom).map_err(core(&input.tck))
}

fn ensure_same_grid(reference: &GridGeometry, ref_path: &Path, other: &GridGeometry, path: &Path) -> CliResult<()> {
    if reference.matches(other, GEOMETRY_TOLERANCE) {
        Ok(())
    } else {
        Err(CliError::data(
            "E_GEOMETRY_MISMATCH",
            Some(path),
            format!(
                "grid {:?} does not match {} (grid {:?}) or their affines differ",
                other.dims(),
                ref_path.display(),
                reference.dims()
            ),
        ))
    }
}

fn write_tck_file(path: &Path, t: &Tractogram) -> CliResult<()> {
    write_atomic(path, &encode_tck(&t.streamlines, &[]))
}

fn phantom(a: PhantomArgs) -> CliResult<()> {
    let kind = match a.kind {
        KindArg::Straight => BundleKind::Straight { length_mm: a.length_mm.unwrap_or(100.0) },
        KindArg::Arc => BundleKind::Arc {
            radius_mm: a.radius_mm.unwrap_or(40.0),
            sweep_deg: a.sweep_deg.unwrap_or(90.0),
        },
        KindArg::UShape => BundleKind::UShape {
            radius_mm: a.radius_mm.unwrap_or(12.5),
            sweep_deg: a.sweep_deg.unwrap_or(180.0),
            leg_length_mm: a.leg_length_mm.unwrap_or(40.0),
        },
    };
    let preset = match a.kind {
        KindArg::Straight => BundleSpec::straight(),
        KindArg::Arc => BundleSpec::arc(),
        KindArg::UShape => BundleSpec::u_shape(),
    };
    let spec = BundleSpec {
        kind,
        tube_radius_mm: a.tube_radius_mm.unwrap_or(preset.tube_radius_mm),
        n_streamlines: a.n_streamlines,
        jitter_mm: a.jitter_mm,
        noise_angle_deg: a.noise_angle_deg,
        dropout: a.dropout,
    };
    let geom = GridGeometry::centered_isotropic([a.grid_size; 3], a.spacing_mm).map_err(core_nopath)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let p = generate_phantom(&spec, &geom, &mut rng).map_err(core_nopath)?;
    let tom = perturb_peaks(&p.tom_gt, spec.noise_angle_deg, spec.dropout, &mut rng).map_err(core_nopath)?;
    let peaks = peaks_with_distractors(&tom, &mut rng);

    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::data("E_IO", Some(&a.out_dir), e.to_string()))?;
    let path = |name: &str| a.out_dir.join(name);
    let mut m = Manifest::new("phantom");
    m.param("kind", format!("{:?}", spec.kind))
        .param("tube_radius_mm", spec.tube_radius_mm)
        .param("n_streamlines", spec.n_streamlines)
        .param("jitter_mm", spec.jitter_mm)
        .param("noise_angle_deg", spec.noise_angle_deg)
        .param("dropout", spec.dropout)
        .param("grid_size", a.grid_size)
        .param("spacing_mm", a.spacing_mm)
        .push("master_seed", a.seed);

    write_tck_file(&path("tractogram.tck"), &p.tractogram)?;
    m.output("tractogram", &path("tractogram.tck"));
    let images = [
        ("tom_gt", encode_orientation_map(&p.tom_gt)),
        ("tom", encode_orientation_map(&tom)),
        ("peaks", encode_peak_image(&peaks)),
        ("tract_mask", encode_mask(&p.tract_mask_gt)),
        ("start", encode_mask(&p.endpoints_gt.start)),
        ("end", encode_mask(&p.endpoints_gt.end)),
    ];
    for (name, bytes) in images {
        let file = path(&format!("{name}.nii.gz"));
        write_nifti(&file, bytes)?;
        m.output(name, &file);
    }
    m.count("streamlines", p.tractogram.len())
        .count("mask_voxels", p.tract_mask_gt.count())
        .count("tom_voxels", tom.nonzero_count());
    m.write_to(&path("manifest.txt"))?;
    eprintln!(
        "phantom: {} streamlines, {} mask voxels written to {}",
        p.tractogram.len(),
        p.tract_mask_gt.count(),
        a.out_dir.display()
    );
    Ok(())
}

fn make_mask(a: MakeMaskArgs) -> CliResult<()> {
    let t = load_tck(&a.input)?;
    let mask = voxelize(&t);
    write_nifti(&a.out, encode_mask(&mask))?;
    let mut m = Manifest::new("make-mask");
    m.input("tck", &a.input.tck)
        .input("reference", &a.input.reference)
        .count("streamlines", t.len())
        .count("mask_voxels", mask.count())
        .output("mask", &a.out);
    m.write_beside(&a.out)?;
    eprintln!("make-mask: {} voxels from {} streamlines", mask.count(), t.len());
    Ok(())
}

fn make_endings(a: MakeEndingsArgs) -> CliResult<()> {
    let t = load_tck(&a.input)?;
    let mut params = ClusterParams::for_geometry(&t.geometry);
    if let Some(eps) = a.dbscan_eps {
        params.dbscan_eps = eps;
    }
    params.dbscan_min_pts = a.dbscan_min_pts;
    params.subset_size = a.subset_size;
    let r = extract_endpoint_regions(&t, &params, a.close_iters, a.dilate_iters).map_err(core(&a.input.tck))?;
    write_nifti(&a.out_start, encode_mask(&r.start))?;
    write_nifti(&a.out_end, encode_mask(&r.end))?;
    let mut m = Manifest::new("make-endings");
    m.input("tck", &a.input.tck)
        .input("reference", &a.input.reference)
        .param("dbscan_eps", params.dbscan_eps)
        .param("dbscan_min_pts", params.dbscan_min_pts)
        .param("subset_size", params.subset_size)
        .param("close_iters", a.close_iters)
        .param("dilate_iters", a.dilate_iters)
        .count("streamlines", t.len())
        .count("start_voxels", r.start.count())
        .count("end_voxels", r.end.count())
        .output("start", &a.out_start)
        .output("end", &a.out_end);
    m.write_beside(&a.out_start)?;
    m.write_beside(&a.out_end)?;
    eprintln!("make-endings: start {} voxels, end {} voxels", r.start.count(), r.end.count());
    Ok(())
}

fn make_tom(a: MakeTomArgs) -> CliResult<()> {
    let t = load_tck(&a.input)?;
    let mut params = ClusterParams::for_geometry(&t.geometry);
    params.meanshift_bandwidth = a.bandwidth;
    params.meanshift_tol = a.tolerance;
    params.meanshift_merge_radius = a.merge_radius;
    let tom = extract_tom(&t, &params).map_err(core(&a.input.tck))?;
    write_nifti(&a.out, encode_orientation_map(&tom))?;
    let mut m = Manifest::new("make-tom");
    m.input("tck", &a.input.tck)
        .input("reference", &a.input.reference)
        .param("bandwidth", a.bandwidth)
        .param("tolerance", a.tolerance)
        .param("merge_radius", a.merge_radius)
        .count("streamlines", t.len())
        .count("tom_voxels", tom.nonzero_count())
        .output("tom", &a.out);
    m.write_beside(&a.out)?;
    eprintln!("make-tom: {} voxels with an orientation", tom.nonzero_count());
    Ok(())
}

struct LoadedRegions {
    mask: BinaryMask,
    start: BinaryMask,
    end: BinaryMask,
}

fn load_regions(r: &Regions, reference: &GridGeometry, ref_path: &Path) -> CliResult<LoadedRegions> {
    let mask = load_mask(&r.mask)?;
    ensure_same_grid(reference, ref_path, mask.geometry(), &r.mask)?;
    if mask.is_empty() {
        return Err(CliError::data("E_EMPTY_MASK", Some(&r.mask), "tract mask has no set voxels"));
    }
    let start = load_mask(&r.start)?;
    ensure_same_grid(reference, ref_path, start.geometry(), &r.start)?;
    let end = load_mask(&r.end)?;
    ensure_same_grid(reference, ref_path, end.geometry(), &r.end)?;
    Ok(LoadedRegions { mask, start, end })
}

fn track(a: TrackArgs) -> CliResult<()> {
    let tom = read_orientation_map(&a.tom).map_err(core(&a.tom))?;
    let geom = tom.geometry().clone();
    let regions = load_regions(&a.regions, &geom, &a.tom)?;
    let pruned = prune_peaks(&tom, a.peak_threshold).map_err(core_nopath)?;

    let field = match a.flavor {
        FlavorArg::Direct => pruned,
        FlavorArg::BestOrig | FlavorArg::Fused => {
            let Some(peaks_path) = &a.peaks else {
                return Err(CliError::usage("E_MISSING_ARGUMENT", "--peaks is required for the best-orig and fused flavors"));
            };
            let peaks = read_peak_image(peaks_path).map_err(core(peaks_path))?;
            ensure_same_grid(&geom, &a.tom, peaks.geometry(), peaks_path)?;
            match a.flavor {
                FlavorArg::BestOrig => select_best_original_peak(&peaks, &pruned),
                _ => fuse_prior(&pruned, &peaks, a.prior_weight),
            }
            .map_err(core(peaks_path))?
        }
    };

    let cfg = TrackerConfig {
        step_size_vox: a.step_size,
        gaussian_std: a.gaussian_std,
        min_length_mm: a.min_length,
        target_count: a.target_count,
        max_steps: a.max_steps,
        max_attempt_factor: a.max_attempt_factor,
        peak_eps: a.peak_eps,
        master_seed: a.seed,
        mode: match a.mode {
            ModeArg::Probabilistic => TrackingMode::Probabilistic,
            ModeArg::Deterministic => TrackingMode::Deterministic,
        },
        smooth: !a.no_smooth,
        ..TrackerConfig::default()
    };
    let ctx = TrackingContext::new(field, regions.mask, regions.start, regions.end).map_err(core_nopath)?;
    let r = track_bundle(&ctx, &cfg).map_err(core(&a.regions.mask))?;
    write_tck_file(&a.out, &r.tractogram)?;

    let mut m = Manifest::new("track");
    m.input("tom", &a.tom)
        .input("mask", &a.regions.mask)
        .input("start", &a.regions.start)
        .input("end", &a.regions.end);
    if let Some(p) = &a.peaks {
        m.input("peaks", p);
    }
    m.param("flavor", format!("{:?}", a.flavor).to_lowercase())
        .param("prior_weight", a.prior_weight)
        .param("mode", format!("{:?}", cfg.mode).to_lowercase())
        .param("step_size_vox", cfg.step_size_vox)
        .param("gaussian_std", cfg.gaussian_std)
        .param("min_length_mm", cfg.min_length_mm)
        .param("target_count", cfg.target_count)
        .param("max_steps", cfg.max_steps)
        .param("max_attempt_factor", cfg.max_attempt_factor)
        .param("peak_eps", cfg.peak_eps)
        .param("peak_threshold", a.peak_threshold)
        .param("smooth", cfg.smooth)
        .push("master_seed", cfg.master_seed)
        .count("attempts", r.attempts)
        .count("accepted", r.accepted)
        .count("rejected_too_short", r.rejects.too_short)
        .count("rejected_endpoint_not_in_regions", r.rejects.endpoint_not_in_regions)
        .count("rejected_left_mask_degenerate", r.rejects.left_mask_degenerate)
        .count("rejected_left_tract_mask", r.rejects.left_tract_mask)
        .push("budget_exhausted", r.budget_exhausted)
        .output("tractogram", &a.out);
    m.write_beside(&a.out)?;
    eprintln!("track: {} of {} streamlines accepted after {} attempts", r.accepted, cfg.target_count, r.attempts);
    if r.budget_exhausted {
        eprintln!(
            "warning: attempt budget of {} exhausted before reaching the target count",
            cfg.max_attempt_factor * cfg.target_count
        );
    }
    Ok(())
}

fn filter(a: FilterArgs) -> CliResult<()> {
    let mask = load_mask(&a.regions.mask)?;
    let geom = mask.geometry().clone();
    let regions = load_regions(&a.regions, &geom, &a.regions.mask)?;
    let t = read_tck(&a.tck, geom.clone()).map_err(core(&a.tck))?;
    let ctx = TrackingContext::new(OrientationMap::zeros(geom), regions.mask, regions.start, regions.end)
        .map_err(core_nopath)?;
    let kept = filter_streamlines(&t, &ctx, a.min_length);
    write_tck_file(&a.out, &kept)?;
    let mut m = Manifest::new("filter");
    m.input("tck", &a.tck)
        .input("mask", &a.regions.mask)
        .input("start", &a.regions.start)
        .input("end", &a.regions.end)
        .param("min_length_mm", a.min_length)
        .count("input", t.len())
        .count("kept", kept.len())
        .output("tractogram", &a.out);
    m.write_beside(&a.out)?;
    eprintln!("filter: kept {} of {} streamlines", kept.len(), t.len());
    Ok(())
}

#[derive(Debug)]
struct BundlePaths {
    name: String,
    masks: [PathBuf; 2],
    toms: Option<[PathBuf; 2]>,
}

fn parse_bundle(spec: &str) -> CliResult<BundlePaths> {
    let bad = || {
        CliError::usage(
            "E_BAD_BUNDLE_SPEC",
            format!("`{spec}`: expected NAME=PRED_MASK,REF_MASK[,PRED_TOM,REF_TOM]"),
        )
    };
    let (name, rest) = spec.split_once('=').ok_or_else(bad)?;
    let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
    if name.trim().is_empty() || parts.iter().any(|p| p.is_empty()) {
        return Err(bad());
    }
    let p = |i: usize| PathBuf::from(parts[i]);
    let toms = match parts.len() {
        2 => None,
        4 => Some([p(2), p(3)]),
        _ => return Err(bad()),
    };
    Ok(BundlePaths { name: name.trim().to_string(), masks: [p(0), p(1)], toms })
}

fn eval(a: EvalArgs) -> CliResult<()> {
    let bundles: Vec<BundlePaths> = a.bundles.iter().map(|s| parse_bundle(s)).collect::<CliResult<_>>()?;
    let with_toms = bundles.iter().filter(|b| b.toms.is_some()).count();
    if with_toms != 0 && with_toms != bundles.len() {
        return Err(CliError::usage(
            "E_BAD_BUNDLE_SPEC",
            "either every --bundle names TOM files or none does",
        ));
    }
    let mut pred_masks = BTreeMap::new();
    let mut ref_masks = BTreeMap::new();
    let mut pred_toms = BTreeMap::new();
    let mut ref_toms = BTreeMap::new();
    for b in &bundles {
        if pred_masks.contains_key(&b.name) {
            return Err(CliError::usage("E_BAD_BUNDLE_SPEC", format!("bundle `{}` given twice", b.name)));
        }
        let pm = load_mask(&b.masks[0])?;
        let rm = load_mask(&b.masks[1])?;
        ensure_same_grid(rm.geometry(), &b.masks[1], pm.geometry(), &b.masks[0])?;
        if let Some([pt, rt]) = &b.toms {
            let ptom = read_orientation_map(pt).map_err(core(pt))?;
            let rtom = read_orientation_map(rt).map_err(core(rt))?;
            ensure_same_grid(rtom.geometry(), rt, ptom.geometry(), pt)?;
            pred_toms.insert(b.name.clone(), ptom);
            ref_toms.insert(b.name.clone(), rtom);
        }
        pred_masks.insert(b.name.clone(), pm);
        ref_masks.insert(b.name.clone(), rm);
    }
    let report = evaluate(&pred_masks, &ref_masks, &pred_toms, &ref_toms).map_err(core_nopath)?;
    let text = match a.format {
        ReportFormat::Text => report.to_text(),
        ReportFormat::Kv => report.to_key_value(),
    };
    print!("{text}");
    if let Some(out) = &a.out {
        write_atomic(out, text.as_bytes())?;
        let mut m = Manifest::new("eval");
        for b in &bundles {
            m.input(&format!("{}.pred_mask", b.name), &b.masks[0])
                .input(&format!("{}.ref_mask", b.name), &b.masks[1]);
            if let Some([pt, rt]) = &b.toms {
                m.input(&format!("{}.pred_tom", b.name), pt)
                    .input(&format!("{}.ref_tom", b.name), rt);
            }
        }
        m.param("format", format!("{:?}", a.format).to_lowercase())
            .count("bundles", bundles.len())
            .output("report", out);
        m.write_beside(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundle_specs() {
        let b = parse_bundle("cst=a.nii,b.nii").unwrap();
        assert_eq!(b.name, "cst");
        assert!(b.toms.is_none());
        let b = parse_bundle("af = p.nii, r.nii, pt.nii, rt.nii").unwrap();
        assert_eq!(b.name, "af");
        assert_eq!(b.toms.unwrap()[1], PathBuf::from("rt.nii"));
        for bad in ["cst", "=a,b", "x=a", "x=a,b,c", "x=a,,b"] {
            assert_eq!(parse_bundle(bad).unwrap_err().code, "E_BAD_BUNDLE_SPEC", "{bad}");
        }
    }
}
