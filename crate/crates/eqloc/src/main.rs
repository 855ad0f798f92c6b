use mimalloc::MiMalloc;

// Form evaluation trees allocate many short-lived component vectors; the
// default allocator contends across quadrature threads.
#[global_allocator]
static GLOBAL: MiMalloc = MiMalloc;

fn main() {
    std::process::exit(eqloc::cli::run_main());
}
