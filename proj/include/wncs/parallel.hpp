#pragma once

namespace wncs {

/// OpenMP team size for a requested thread count; <= 0 selects the runtime
/// default. Always 1 in builds without OpenMP.
int worker_count(int requested);

}  // namespace wncs
