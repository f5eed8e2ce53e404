use lesionseg::imagecore::{region_to_mask, Image};
use lesionseg::morphseg::{morph_segment, morph_segment_detailed, MorphParams};
use lesionseg::synth::{ellipse_phantom, streak_phantom, PhantomSpec};
use lesionseg::MorphParamsF64;

fn centred(size: usize, snr: f64, seed: u64) -> PhantomSpec {
    PhantomSpec {
        center: (size as f64 / 2.0, size as f64 / 2.0),
        semi_axes: (size as f64 * 0.12, size as f64 * 0.18),
        angle: 0.2,
        ..PhantomSpec::random(size, size, snr, seed)
    }
}

#[test]
fn ellipse_is_recovered_by_one_region() {
    for seed in 0..3 {
        let spec = centred(128, 10.0, seed);
        let p = ellipse_phantom(&spec).unwrap();
        let regions = morph_segment(&p.image, &MorphParamsF64::for_size(128, 128));
        let best = regions
            .iter()
            .map(|r| region_to_mask(r, 128, 128).unwrap().intersection_area(&p.gt).unwrap())
            .max()
            .unwrap_or(0);
        let coverage = best as f64 / p.gt.area() as f64;
        assert!(coverage >= 0.9, "seed {seed}: coverage {coverage}");
    }
}

#[test]
fn duct_streak_is_excluded() {
    let spec = centred(128, 30.0, 5);
    let p = streak_phantom(&spec, 3).unwrap();
    let out = morph_segment_detailed(&p.image, &MorphParams::for_size(128, 128));
    // the streak itself is found as a candidate...
    assert!(out
        .candidates
        .iter()
        .any(|r| region_to_mask(r, 128, 128).unwrap().intersection_area(&p.gt).unwrap() * 2 > p.gt.area()));
    // ...and rejected by the shape filter
    for r in &out.regions {
        let m = region_to_mask(r, 128, 128).unwrap();
        assert_eq!(m.intersection_area(&p.gt).unwrap(), 0);
    }
}

#[test]
fn blank_image_has_no_candidates() {
    let img = Image::filled(64, 64, 1, 0.9f32).unwrap();
    assert!(morph_segment(&img, &MorphParams::for_size(64, 64)).is_empty());
    let rgb = Image::filled(32, 48, 3, 1.0f64).unwrap();
    assert!(morph_segment(&rgb, &MorphParams::for_size(32, 48)).is_empty());
}
