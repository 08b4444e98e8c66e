use spikeq::channel::{frame_windows, simulate_link, LinkConfig};
use spikeq::encoding::{init_encoder, Encoder, QuantRange};
use spikeq::evaluation::{evaluate, point_rng, StopRule, BLOCK_SYMBOLS};
use spikeq::rng;
use spikeq::snn::{forward, init_snn_with_gain, LifParams, ReadoutParams};
use spikeq::training::calibrate_q_range;

#[test]
fn rate_matches_raw_spike_dump() {
    let link = LinkConfig::default();
    let q: QuantRange = calibrate_q_range(&link, -19.0, 20_000, 7).unwrap();
    let encoder = Encoder::Learned(init_encoder(256, 8, 10, q, &mut rng::stream(7, rng::INIT)));
    let snn = init_snn_with_gain(
        8 * link.d_tap,
        80,
        4,
        0.5,
        LifParams::default(),
        ReadoutParams::default(),
        &mut rng::stream(8, rng::INIT),
    );
    let n = 100;
    let point = evaluate(
        &encoder,
        &snn,
        &link,
        -19.0,
        StopRule::symbols(n),
        true,
        &mut point_rng(3, 0),
    )
    .unwrap();
    assert_eq!(point.bits_counted, 2 * n);

    // replay the same link realization and count spikes from the dumps
    let block = simulate_link(&link, BLOCK_SYMBOLS, -19.0, &mut point_rng(3, 0)).unwrap();
    let prepared = encoder.prepare(true).unwrap();
    let mut raster = prepared.raster(link.d_tap);
    let mut classes = Vec::new();
    let mut spikes = 0usize;
    for w in frame_windows(&block, link.d_tap).take(n as usize) {
        prepared
            .encode(w.samples, &mut raster, &mut classes)
            .unwrap();
        let trace = forward(&raster, &snn).unwrap();
        assert_eq!(trace.hidden_spikes.len(), 80 * 10);
        let dumped = trace.hidden_spikes.iter().filter(|&&s| s).count();
        assert_eq!(dumped, trace.spike_count);
        spikes += dumped;
    }
    assert!(spikes > 0, "oracle needs a network that spikes");
    let oracle = spikes as f64 / (80 * 10 * n as usize) as f64;
    assert_eq!(point.spike_rate, oracle);
}
