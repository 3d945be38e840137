#pragma once

#include <filesystem>

#include "feddag/admm.hpp"
#include "feddag/transports.hpp"

namespace feddag {

enum class TransportKind { InProc, File, Tcp };

TransportKind transport_kind_from_string(const std::string& name);
const char* to_string(TransportKind kind);

struct FederationOptions {
    TransportKind kind = TransportKind::InProc;
    std::filesystem::path exchange_dir;  // file transport
    std::string bind_addr;               // tcp transport; empty -> FEDDAG_BIND_ADDR or default
    std::chrono::milliseconds timeout = std::chrono::seconds(30);
};

// Stands up the chosen transport with one worker thread per site, runs the
// center loop, and tears everything down. Site workers only ever see the
// transport; the center only sees matrices.
FitResult run_federated_fit(const std::vector<SiteDataset>& datasets,
                            const EstimatorConfig& config, const FederationOptions& options,
                            const ProgressCallback& progress = {},
                            const FrameObserver& observer = {});

}  // namespace feddag
