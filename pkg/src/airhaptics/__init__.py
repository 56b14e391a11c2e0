"""Software simulation of mid-air ultrasonic haptics for virtual cockpit controls."""

__version__ = "0.1.0"
