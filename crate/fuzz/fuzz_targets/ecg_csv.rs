#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ecg) = nhep_core::io::read_ecg_csv(data) {
        if ecg.samples.len() <= 1 << 16 {
            let _ = nhep_core::signal::detect_r_peaks(&ecg);
        }
    }
});
