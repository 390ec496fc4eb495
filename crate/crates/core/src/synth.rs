//! Deterministic synthetic sample content: three 256x256 grayscale test
//! scenes and a 16x16 binary logo. These back the bundled assets and the
//! test suites, so they are pure functions of fixed seeds; regenerating
//! them always yields byte-identical files.
//!
//! The scenes pair smooth regions (sky) with broad fields of strong
//! fine-grained texture (water shimmer, furrows). The perceptual mask is
//! detail-driven, so the watermark concentrates where local variance is
//! already high and the smooth regions stay untouched; the textured area
//! is kept large so the mask support conditions the gain system well.

use crate::imaging::{BitPlane, GrayImage};
use crate::rng::XorShift64;

const SCENE_SIZE: usize = 256;

fn clamp_into_image(mut base: Vec<f64>) -> GrayImage {
    for v in base.iter_mut() {
        *v = v.clamp(0.0, 255.0);
    }
    GrayImage::new(SCENE_SIZE, SCENE_SIZE, base).expect("scene buffer is sized")
}

/// A small sailing boat on shimmering water, low sun. The benchmark's
/// default host.
pub fn boat_scene() -> GrayImage {
    let mut rng = XorShift64::new(0xB0A7_0001);
    let mut base = Vec::with_capacity(SCENE_SIZE * SCENE_SIZE);
    let horizon = 112.0;
    for y in 0..SCENE_SIZE {
        for x in 0..SCENE_SIZE {
            let (xf, yf) = (x as f64, y as f64);
            let mut v = if yf < horizon {
                // Smooth sky with a gentle gradient.
                130.0 - 10.0 * yf / horizon + 2.0 * (xf / 29.0).sin()
            } else {
                // Water: faint swell plus strong high-frequency shimmer.
                104.0
                    + 2.5 * (xf / 17.0 + yf / 9.0).sin()
                    + 20.0 * (2.05 * xf + 0.9 * yf).sin()
                    + 15.0 * (1.55 * xf - 0.63 * yf + 1.0).sin()
                    + 9.0 * (rng.next_unit() - 0.5) * 2.0
            };
            // Low sun with a soft falloff.
            let sun = ((xf - 204.0).powi(2) + (yf - 40.0).powi(2)).sqrt();
            if sun < 22.0 {
                v += 28.0 * (1.0 - sun / 22.0).powi(2);
            }
            // Hull: a trapezoid sitting on the waterline.
            if (96.0..=114.0).contains(&yf) {
                let inset = (yf - 96.0) * 0.9;
                if xf >= 88.0 + inset && xf <= 178.0 - inset {
                    v = 78.0 + 2.0 * (xf / 11.0).sin();
                }
            }
            // Mast and sail.
            if (40.0..96.0).contains(&yf) && (127.0..=129.0).contains(&xf) {
                v = 70.0;
            }
            if (45.0..92.0).contains(&yf) {
                let reach = (92.0 - yf) * 0.55;
                if xf > 129.0 && xf <= 129.0 + reach {
                    v = 168.0 - 0.2 * (yf - 45.0);
                }
            }
            base.push(v);
        }
    }
    clamp_into_image(base)
}

/// Rolling hills: smooth sky over densely furrowed ground with scattered
/// trees.
pub fn hills_scene() -> GrayImage {
    let mut rng = XorShift64::new(0xB0A7_0002);
    let mut base = Vec::with_capacity(SCENE_SIZE * SCENE_SIZE);
    let trees: [(f64, f64); 6] = [
        (38.0, 156.0),
        (84.0, 148.0),
        (132.0, 166.0),
        (171.0, 140.0),
        (205.0, 170.0),
        (238.0, 152.0),
    ];
    for y in 0..SCENE_SIZE {
        for x in 0..SCENE_SIZE {
            let (xf, yf) = (x as f64, y as f64);
            let ridge = 118.0 + 18.0 * (xf / 41.0).sin() + 8.0 * (xf / 13.0 + 2.0).sin();
            let mut v = if yf < ridge {
                128.0 - 9.0 * yf / 256.0 + 2.0 * (xf / 37.0).sin()
            } else {
                106.0
                    + 7.0 * (yf - ridge) / 138.0
                    + 20.0 * (1.9 * xf + 0.8 * yf).sin()
                    + 14.0 * (1.45 * (xf - yf) + 0.5).sin()
                    + 8.0 * (rng.next_unit() - 0.5) * 2.0
            };
            for &(tx, ty) in &trees {
                let d2 = (xf - tx).powi(2) + (yf - ty).powi(2);
                v -= 20.0 * (-d2 / 38.0).exp();
            }
            base.push(v);
        }
    }
    clamp_into_image(base)
}

/// A furrowed field under a diagonal brightness sweep; texture covers the
/// whole frame.
pub fn field_scene() -> GrayImage {
    let mut rng = XorShift64::new(0xB0A7_0003);
    let mut base = Vec::with_capacity(SCENE_SIZE * SCENE_SIZE);
    for y in 0..SCENE_SIZE {
        for x in 0..SCENE_SIZE {
            let (xf, yf) = (x as f64, y as f64);
            let v = 116.0
                + 16.0 * xf / 256.0
                + 13.0 * (1.75 * xf + 0.35 * yf).sin()
                + 9.0 * (1.2 * yf - 0.4 * xf + 0.7).sin()
                + 4.0 * (xf / 6.5).sin() * (yf / 8.5).sin()
                + 6.0 * (rng.next_unit() - 0.5) * 2.0;
            base.push(v);
        }
    }
    clamp_into_image(base)
}

/// All three sample scenes with their asset names.
pub fn all_scenes() -> Vec<(&'static str, GrayImage)> {
    vec![
        ("host_boat", boat_scene()),
        ("host_hills", hills_scene()),
        ("host_field", field_scene()),
    ]
}

const ANCHOR: [&str; 16] = [
    "................",
    ".....#####......",
    ".....#...#......",
    ".....#...#......",
    ".....#####......",
    ".......#........",
    "....#######.....",
    ".......#........",
    ".......#........",
    ".......#........",
    "..#....#....#...",
    "..#....#....#...",
    "...#...#...#....",
    "...###.#.###....",
    "......###.......",
    "................",
];

/// A 16x16 anchor glyph, sparse enough for the run-length source coder
/// to bite.
pub fn anchor_logo() -> BitPlane {
    let bits = ANCHOR
        .iter()
        .flat_map(|row| row.chars().map(|c| (c == '#') as u8))
        .collect();
    BitPlane::new(16, 16, bits).expect("glyph rows are 16x16")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_deterministic_and_in_range() {
        for (name, img) in all_scenes() {
            assert_eq!(img.width(), 256, "{name}");
            assert_eq!(img.height(), 256, "{name}");
            assert!(
                img.pixels().iter().all(|&v| (0.0..=255.0).contains(&v)),
                "{name} out of range"
            );
        }
        assert_eq!(boat_scene(), boat_scene());
    }

    #[test]
    fn logo_is_sparse() {
        let logo = anchor_logo();
        let ones: usize = logo.bits().iter().map(|&b| b as usize).sum();
        assert!(ones > 20 && ones < 64, "logo has {ones} set bits");
    }
}
