use std::alloc::{GlobalAlloc, Layout, System};
use std::process::ExitCode;
use std::sync::atomic::{AtomicU64, Ordering};

use centered_ols::bench::MemoryProbe;
use centered_ols::cli::{run, Cli};
use clap::Parser;

/// Tracks live heap bytes and their high-water mark for `bench`.
struct CountingAlloc;

static LIVE: AtomicU64 = AtomicU64::new(0);
static PEAK: AtomicU64 = AtomicU64::new(0);

unsafe impl GlobalAlloc for CountingAlloc {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let ptr = System.alloc(layout);
        if !ptr.is_null() {
            let live = LIVE.fetch_add(layout.size() as u64, Ordering::Relaxed) + layout.size() as u64;
            PEAK.fetch_max(live, Ordering::Relaxed);
        }
        ptr
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        LIVE.fetch_sub(layout.size() as u64, Ordering::Relaxed);
    }
}

#[global_allocator]
static ALLOC: CountingAlloc = CountingAlloc;

/// Peak is reported relative to the live bytes at reset.
struct HeapProbe {
    base: AtomicU64,
}

impl MemoryProbe for HeapProbe {
    fn reset_peak(&self) {
        let live = LIVE.load(Ordering::Relaxed);
        self.base.store(live, Ordering::Relaxed);
        PEAK.store(live, Ordering::Relaxed);
    }

    fn peak_bytes(&self) -> u64 {
        PEAK.load(Ordering::Relaxed)
            .saturating_sub(self.base.load(Ordering::Relaxed))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let probe = HeapProbe {
        base: AtomicU64::new(0),
    };
    let mut stdout = std::io::stdout().lock();
    match run(cli, &mut stdout, Some(&probe)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
