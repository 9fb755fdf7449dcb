#include "toomlab/lattice.hpp"
int main(){ return 0; }
