//! Development probe: prints the fidelity/robustness landscape of the
//! bundled scenes so defaults can be sanity-checked quickly.

use std::time::Instant;

use ssmark_core::*;

fn main() {
    let conv = ConvCodeSpec::k7_standard();
    let params = EmbedParams::new(WatermarkKey::new(0xDEADBEEF));
    let logo = synth::anchor_logo();

    for (name, host) in synth::all_scenes() {
        let px = host.pixels();
        let mean: f64 = px.iter().sum::<f64>() / px.len() as f64;
        let sd = (px.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / px.len() as f64).sqrt();
        let mask = perceptual_mask(&host, &params.wavelet, params.msk_max).unwrap();
        let mmean: f64 = mask.values().iter().sum::<f64>() / mask.values().len() as f64;
        let m2: f64 =
            mask.values().iter().map(|v| v * v).sum::<f64>() / mask.values().len() as f64;
        println!("== {name}: pixel sd {sd:.1}, mask mean {mmean:.3}, mask^2 mean {m2:.3}");

        let t0 = Instant::now();
        let (marked, header) = encode_and_embed(&host, &logo, &params, &conv).unwrap();
        println!(
            "   encode_and_embed: {:?}  src_len {} coded_len {} m {}",
            t0.elapsed(),
            header.src_len,
            header.coded_len,
            header.golomb_m
        );
        println!(
            "   fidelity: psnr {:.2}  ssim {:.4}",
            psnr(&host, &marked).unwrap(),
            ssim(&host, &marked).unwrap()
        );

        // ECC arm under the quality sweep.
        print!("   ecc ber:");
        for qf in [100.0, 75.0, 50.0, 35.0, 25.0, 5.0] {
            let attacked = apply_quantize(&marked, qf, &params.wavelet).unwrap();
            let outcome = decode_and_extract(&attacked, &header, &params, &conv).unwrap();
            let rate = ber(outcome.bitmap.bits(), logo.bits()).unwrap();
            print!("  {qf}:{rate:.3}{}", if outcome.degraded { "*" } else { "" });
        }
        println!();

        // Channel-bit BER of the ECC arm (pre-Viterbi).
        let source = encode_bitmap(&logo);
        let codeword = conv_encode(&source, &conv);
        let true_bits = BitMessage::from_bitstream(&codeword.bits).unwrap().bits();
        print!("   ecc chan:");
        for qf in [100.0, 75.0, 50.0, 35.0, 25.0, 5.0] {
            let attacked = apply_quantize(&marked, qf, &params.wavelet).unwrap();
            let rep = extract(&attacked, header.coded_len as usize, &params).unwrap();
            let rate = ber(&rep.to_message().bits(), &true_bits).unwrap();
            print!("  {qf}:{rate:.3}");
        }
        println!();

        // Raw (uncompensated, uncoded 256-bit) arm.
        let raw_msg = BitMessage::from_bits(logo.bits()).unwrap();
        let alpha = baseline_alpha(&host, &params, 256).unwrap();
        println!("   baseline alpha: {alpha:.4}");
        let raw_marked = embed_fixed_gain(&host, &raw_msg, &params, alpha).unwrap();
        print!("   raw ber:");
        let clean_rep = extract(&raw_marked, 256, &params).unwrap();
        let clean = ber(&clean_rep.to_message().bits(), &raw_msg.bits()).unwrap();
        print!("  clean:{clean:.3}");
        for qf in [100.0, 75.0, 50.0, 35.0, 25.0, 5.0] {
            let attacked = apply_quantize(&raw_marked, qf, &params.wavelet).unwrap();
            let rep = extract(&attacked, 256, &params).unwrap();
            let rate = ber(&rep.to_message().bits(), &raw_msg.bits()).unwrap();
            print!("  {qf}:{rate:.3}");
        }
        println!();
        println!(
            "   raw fidelity: psnr {:.2}",
            psnr(&host, &raw_marked).unwrap()
        );

        // Wrong keys.
        let keys = derive_keys(WatermarkKey::new(0x5EC0_11D5), 16);
        let mut lo = 1.0f64;
        let mut hi = 0.0f64;
        let msg404 = BitMessage::random(404, 1).unwrap();
        let marked404 = embed(&host, &msg404, &params).unwrap();
        for key in &keys {
            let mut wrong = params;
            wrong.key = *key;
            let rep = extract(&marked404, 404, &wrong).unwrap();
            let rate = ber(&rep.to_message().bits(), &msg404.bits()).unwrap();
            lo = lo.min(rate);
            hi = hi.max(rate);
        }
        println!("   wrong-key ber range over 16 keys: [{lo:.3}, {hi:.3}]");

        // Prepared-embedder timing for the acceptance budget.
        let t0 = Instant::now();
        let prepared = PreparedEmbedder::prepare(&host, &params, 404).unwrap();
        let prep_time = t0.elapsed();
        let t0 = Instant::now();
        let mut ok = 0;
        for seed in 0..20u64 {
            let msg = BitMessage::random(404, seed).unwrap();
            let marked = prepared.embed(&msg).unwrap();
            let rep = prepared.extract(&marked).unwrap();
            if rep.symbols() == msg.symbols() {
                ok += 1;
            }
        }
        println!(
            "   prepare {:?}, 20 embed+extract {:?}, clean {ok}/20",
            prep_time,
            t0.elapsed()
        );
    }
}
