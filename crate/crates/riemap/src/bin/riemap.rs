fn main() {
    // placeholder until the scenario and run modules land
}
