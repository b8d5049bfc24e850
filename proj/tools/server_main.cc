#include "visim/server.h"

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <pthread.h>
#include <thread>

int
main(int argc, char** argv)
{
    CLI::App app{"visim compare server (JSON over HTTP)"};
    visim::ServerConfig cfg;
    const char* env = std::getenv("VISIM_OUT_DIR");
    cfg.outDir = env && *env ? env : ".";
    std::string outDir = cfg.outDir.string();
    app.add_option("--host", cfg.host, "Listen address")->capture_default_str();
    app.add_option("--port", cfg.port, "Listen port (0 picks one)")->capture_default_str();
    app.add_option("--out-dir", outDir, "Run directory root (default $VISIM_OUT_DIR or .)");
    app.add_option("--workers", cfg.workers, "Simulation threads (0: one per core)")->capture_default_str();
    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        return app.exit(e) == 0 ? 0 : 2;
    }
    cfg.outDir = outDir;

    try
    {
        // SIGINT/SIGTERM are taken by a dedicated thread instead of a handler.
        sigset_t set;
        sigemptyset(&set);
        sigaddset(&set, SIGINT);
        sigaddset(&set, SIGTERM);
        pthread_sigmask(SIG_BLOCK, &set, nullptr);

        visim::CompareServer server(cfg);
        const int port = server.Bind();
        std::thread waiter([&server, set] {
            int sig = 0;
            sigwait(&set, &sig);
            server.Stop();
        });
        waiter.detach();
        std::cout << "listening on http://" << cfg.host << ':' << port << std::endl;
        server.Serve();
    }
    catch (const std::exception& e)
    {
        std::cerr << "visim-server: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
