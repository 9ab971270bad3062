// Standalone completions-compatible mock endpoint for offline protocol runs.

#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "cpelab/mockllm.hpp"

using namespace cpelab;

int main(int argc, char** argv) {
    CLI::App app{"mockllm: completions-compatible mock server"};
    std::string rule = "always0";
    int period = 3;
    app.add_option("--rule", rule, "always0 | always1 | flip | period-follow | fixed-period");
    app.add_option("--period", period, "period for the fixed-period rule");

    CLI11_PARSE(app, argc, argv);

    MockLlmServer::Rule r;
    if (rule == "always0") r = MockLlmServer::always("0");
    else if (rule == "always1") r = MockLlmServer::always("1");
    else if (rule == "flip") r = MockLlmServer::flip_sensitive();
    else if (rule == "period-follow") r = MockLlmServer::period_follower();
    else if (rule == "fixed-period") r = MockLlmServer::fixed_period(period);
    else {
        std::cerr << "unknown rule: " << rule << "\n";
        return 1;
    }

    MockLlmServer server(std::move(r));
    server.start();
    std::cout << "serving " << server.base_url() << "/v1/completions (rule: " << rule << ")\n"
              << "press enter to stop\n";
    std::cin.get();
    server.stop();
    return 0;
}
