#include "gridflex/cli.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app{"Combined MV/LV scheduling and P-Q flexibility envelopes"};
    gridflex::RunRequest req;
    int n_dirs = 0;
    std::string scheme, out;
    app.add_option("--config", req.config, "scenario config file")->required()->check(CLI::ExistingFile);
    app.add_option("--command", req.command, "opf | envelope | coordinate | verify")
        ->required()
        ->check(CLI::IsMember({"opf", "envelope", "coordinate", "verify"}));
    app.add_option("--n-dirs", n_dirs, "number of envelope directions")->check(CLI::Range(4, 100000));
    app.add_option("--scheme", scheme, "tso_leader | dso_leader");
    app.add_option("--out", out, "output directory");
    app.add_flag("--svg", req.svg, "also write an SVG plot of the envelopes");
    CLI11_PARSE(app, argc, argv);

    if (app.count("--n-dirs"))
        req.n_dirs = n_dirs;
    if (app.count("--scheme"))
        req.scheme = scheme;
    if (app.count("--out"))
        req.out = out;
    return gridflex::run(req, std::cout, std::cerr);
}
