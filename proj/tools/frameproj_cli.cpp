// Placeholder entry point; replaced by the full CLI once all modules exist.
int main() { return 0; }
