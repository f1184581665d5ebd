#include "app.hpp"

int main(int argc, char** argv) { return smolsens::app::main_cli(argc, argv); }
