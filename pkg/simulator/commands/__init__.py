# Command handlers registered onto the simulator CLI
