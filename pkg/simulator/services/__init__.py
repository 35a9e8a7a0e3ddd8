# Services package: scenario, channel, precoding, rates and analysis
