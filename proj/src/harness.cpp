#include "feddag/harness.hpp"

#include <thread>

namespace feddag {

TransportKind transport_kind_from_string(const std::string& name) {
    if (name == "inproc") return TransportKind::InProc;
    if (name == "file") return TransportKind::File;
    if (name == "tcp") return TransportKind::Tcp;
    throw ConfigError("unknown transport '" + name + "' (want inproc|file|tcp)");
}

const char* to_string(TransportKind kind) {
    switch (kind) {
        case TransportKind::InProc: return "inproc";
        case TransportKind::File: return "file";
        case TransportKind::Tcp: return "tcp";
    }
    return "?";
}

namespace {

struct WorkerPool {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors;

    explicit WorkerPool(std::size_t n) : errors(n) {}

    ~WorkerPool() {
        for (auto& t : threads)
            if (t.joinable()) t.join();
    }

    void join_all() {
        for (auto& t : threads)
            if (t.joinable()) t.join();
    }

    void rethrow_first() const {
        for (const auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
};

}  // namespace

FitResult run_federated_fit(const std::vector<SiteDataset>& datasets,
                            const EstimatorConfig& config, const FederationOptions& options,
                            const ProgressCallback& progress, const FrameObserver& observer) {
    const ProblemDescriptor desc = validate_problem(datasets);
    std::vector<std::string> ids;
    ids.reserve(datasets.size());
    for (const auto& ds : datasets) ids.push_back(ds.site_id());

    WorkerPool pool(datasets.size());
    std::unique_ptr<FederationTransport> transport;

    switch (options.kind) {
        case TransportKind::InProc: {
            auto inproc = std::make_unique<InProcTransport>(ids, options.timeout);
            for (std::size_t k = 0; k < datasets.size(); ++k) {
                SiteChannel& channel = inproc->site_channel(static_cast<int>(k));
                pool.threads.emplace_back([&, k, channel_ptr = &channel] {
                    try {
                        run_site_worker(datasets[k], *channel_ptr);
                    } catch (...) {
                        pool.errors[k] = std::current_exception();
                    }
                });
            }
            transport = std::move(inproc);
            break;
        }
        case TransportKind::File: {
            if (options.exchange_dir.empty())
                throw ConfigError("file transport needs an exchange directory");
            transport =
                std::make_unique<FileTransport>(options.exchange_dir, ids, options.timeout);
            for (std::size_t k = 0; k < datasets.size(); ++k) {
                pool.threads.emplace_back([&, k] {
                    try {
                        FileSiteChannel channel(options.exchange_dir, datasets[k].site_id(),
                                                options.timeout);
                        run_site_worker(datasets[k], channel);
                    } catch (...) {
                        pool.errors[k] = std::current_exception();
                    }
                });
            }
            break;
        }
        case TransportKind::Tcp: {
            const std::string addr =
                options.bind_addr.empty() ? default_bind_addr() : options.bind_addr;
            auto tcp = std::make_unique<TcpTransport>(addr, ids, options.timeout);
            const std::string connect_addr =
                "127.0.0.1:" + std::to_string(tcp->port());
            for (std::size_t k = 0; k < datasets.size(); ++k) {
                pool.threads.emplace_back([&, k, connect_addr] {
                    try {
                        TcpSiteChannel channel(connect_addr, datasets[k].site_id(),
                                               options.timeout);
                        run_site_worker(datasets[k], channel);
                    } catch (...) {
                        pool.errors[k] = std::current_exception();
                    }
                });
            }
            tcp->accept_sites();
            transport = std::move(tcp);
            break;
        }
    }

    if (observer) transport->set_frame_observer(observer);

    FitResult result;
    try {
        result = fit(datasets, config, *transport, progress);
    } catch (...) {
        try {
            transport->terminate();
        } catch (...) {
            // best-effort release of workers; the original error wins
        }
        pool.join_all();
        throw;
    }
    pool.join_all();
    pool.rethrow_first();
    return result;
}

}  // namespace feddag
