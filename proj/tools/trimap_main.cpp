#include <trimap/cli.hpp>

int main(int argc, char** argv) { return trimap::cli::run(argc, argv); }
