//! Renders one image under eight seeded augmentations side by side.
//!
//! cargo run --example augment_preview [OUT_PNG]

use std::path::PathBuf;

use ember::data::{augment, AugmentationSpec, ImageTensor};
use ember::render::{save_png, Canvas};

fn sample_image() -> ImageTensor {
    let img = image::RgbImage::from_fn(96, 96, |x, y| {
        if y > 60 {
            image::Rgb([40, 110, 40])
        } else if (x as i32 - 48).abs() < (60 - y as i32) / 3 {
            image::Rgb([230, 90 + (y as u8), 20])
        } else {
            image::Rgb([150, 180, 220])
        }
    });
    ImageTensor::from_rgb8(&img)
}

fn main() -> ember::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("ember-augment-preview.png"));
    let spec = AugmentationSpec {
        gaussian_noise_stddev: 6.0,
        ..AugmentationSpec::rotation_zoom_flip(7)
    };
    spec.validate()?;
    let source = sample_image();
    let mut canvas = Canvas::new(9 * 100 + 4, 104, [255, 255, 255]);
    canvas.blit(&source.to_rgb8(), 4, 4);
    for i in 0..8u64 {
        let mut rng = ember::rng::stream(spec.seed, &[i]);
        let view = augment(&source, &spec, &mut rng);
        canvas.blit(&view.to_rgb8(), 4 + (i as i64 + 1) * 100, 4);
    }
    save_png(&canvas.image, &out)?;
    println!("original plus 8 augmented views written to {}", out.display());
    Ok(())
}
